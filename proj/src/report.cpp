#include "orbitcert/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace orbitcert {

namespace {

std::string scheme_name(Scheme s) {
    return s == Scheme::Explicit ? "explicit" : "semi_implicit";
}
Scheme scheme_from_name(const std::string& s) {
    if (s == "explicit") return Scheme::Explicit;
    if (s == "semi_implicit") return Scheme::SemiImplicit;
    throw std::invalid_argument("unknown scheme: " + s);
}
std::string system_name(SystemKind s) {
    return s == SystemKind::Pendulum ? "pendulum" : "cartpole";
}
SystemKind system_from_name(const std::string& s) {
    if (s == "pendulum") return SystemKind::Pendulum;
    if (s == "cartpole") return SystemKind::CartpoleSwingup;
    throw std::invalid_argument("unknown system: " + s);
}

Json dec(double x) { return Json(double_to_decimal(x)); }
double undec(const Json& j) { return decimal_to_double(j.get<std::string>()); }

Json point_to_json(const std::vector<double>& x) {
    Json a = Json::array();
    for (double v : x) a.push_back(dec(v));
    return a;
}
std::vector<double> point_from_json(const Json& j) {
    std::vector<double> x;
    x.reserve(j.size());
    for (const auto& v : j) x.push_back(undec(v));
    return x;
}

Json points_to_json(const std::vector<std::vector<double>>& xs) {
    Json a = Json::array();
    for (const auto& x : xs) a.push_back(point_to_json(x));
    return a;
}
std::vector<std::vector<double>> points_from_json(const Json& j) {
    std::vector<std::vector<double>> xs;
    xs.reserve(j.size());
    for (const auto& x : j) xs.push_back(point_from_json(x));
    return xs;
}

Json intervals_to_json(const std::vector<Interval>& v) {
    Json a = Json::array();
    for (const Interval& x : v) a.push_back(interval_to_json(x));
    return a;
}
std::vector<Interval> intervals_from_json(const Json& j) {
    std::vector<Interval> v;
    v.reserve(j.size());
    for (const auto& x : j) v.push_back(interval_from_json(x));
    return v;
}

Json box_to_json(const IntervalVector& box) {
    Json a = Json::array();
    for (std::size_t i = 0; i < box.size(); ++i) a.push_back(interval_to_json(box[i]));
    return a;
}
IntervalVector box_from_json(const Json& j) {
    IntervalVector box(j.size());
    for (std::size_t i = 0; i < box.size(); ++i) box[i] = interval_from_json(j[i]);
    return box;
}

std::vector<std::string> state_column_names(const MdpConfig& config) {
    if (config.system == SystemKind::Pendulum) return {"theta", "omega"};
    return {"x", "x_dot", "theta", "theta_dot"};
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    sd = xs.size() > 1 ? std::sqrt(acc / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Run manifests

std::string make_run_id(const std::string& command, const Json& config_snapshot,
                        std::uint64_t seed) {
    return fnv1a64_hex(command + "\n" + config_snapshot.dump() + "\n" + std::to_string(seed));
}

Json manifest_to_json(const RunManifest& manifest) {
    Json j;
    j["command"] = manifest.command;
    j["config"] = manifest.config_snapshot;
    j["seed"] = std::to_string(manifest.seed);
    j["tool_version"] = manifest.tool_version;
    j["inputs"] = Json(manifest.input_digests);
    j["outputs"] = Json(manifest.output_digests);
    j["wall_ms"] = dec(manifest.wall_ms);
    j["run_id"] = manifest.run_id;
    return j;
}

RunManifest manifest_from_json(const Json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config_snapshot = j.at("config");
    m.seed = std::stoull(j.at("seed").get<std::string>());
    m.tool_version = j.at("tool_version").get<std::string>();
    m.input_digests = j.at("inputs").get<std::map<std::string, std::string>>();
    m.output_digests = j.at("outputs").get<std::map<std::string, std::string>>();
    m.wall_ms = undec(j.at("wall_ms"));
    m.run_id = j.at("run_id").get<std::string>();
    return m;
}

// ---------------------------------------------------------------------------
// Config serialization

Json config_to_json(const MdpConfig& config) {
    Json j;
    j["system"] = system_name(config.system);
    j["scheme"] = scheme_name(config.scheme);
    j["h"] = dec(config.h);
    j["episode_len"] = config.episode_len;
    j["control_clip"] = Json{{"lo", dec(config.control_clip.lo)}, {"hi", dec(config.control_clip.hi)}};
    j["control_scale"] = dec(config.control_scale);
    if (config.velocity_clip)
        j["velocity_clip"] =
            Json{{"lo", dec(config.velocity_clip->lo)}, {"hi", dec(config.velocity_clip->hi)}};
    j["x_escape"] = dec(config.x_escape);
    j["terminations_enabled"] = config.terminations_enabled;
    if (config.initial_distribution) {
        Json ranges = Json::array();
        for (const ClipRange& r : config.initial_distribution->ranges)
            ranges.push_back(Json{{"lo", dec(r.lo)}, {"hi", dec(r.hi)}});
        j["initial_distribution"] = std::move(ranges);
    }
    if (config.system == SystemKind::Pendulum) {
        j["constants"] = Json{{"l", dec(config.pendulum.l)},
                              {"m", dec(config.pendulum.m)},
                              {"g", dec(config.pendulum.g)}};
    } else {
        j["constants"] = Json{{"m_p", dec(config.cartpole.m_p)},
                              {"l", dec(config.cartpole.l)},
                              {"m_c", dec(config.cartpole.m_c)},
                              {"g", dec(config.cartpole.g)},
                              {"f", dec(config.cartpole.f)}};
    }
    return j;
}

MdpConfig config_from_json(const Json& j) {
    MdpConfig c;
    c.system = system_from_name(j.at("system").get<std::string>());
    c.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    c.h = undec(j.at("h"));
    c.episode_len = j.at("episode_len").get<int>();
    c.control_clip = ClipRange{undec(j.at("control_clip").at("lo")), undec(j.at("control_clip").at("hi"))};
    c.control_scale = undec(j.at("control_scale"));
    if (j.contains("velocity_clip"))
        c.velocity_clip =
            ClipRange{undec(j.at("velocity_clip").at("lo")), undec(j.at("velocity_clip").at("hi"))};
    else
        c.velocity_clip.reset();
    c.x_escape = undec(j.at("x_escape"));
    c.terminations_enabled = j.at("terminations_enabled").get<bool>();
    if (j.contains("initial_distribution")) {
        InitialDistribution dist;
        for (const Json& r : j.at("initial_distribution"))
            dist.ranges.push_back(ClipRange{undec(r.at("lo")), undec(r.at("hi"))});
        c.initial_distribution = std::move(dist);
    }
    const Json& k = j.at("constants");
    if (c.system == SystemKind::Pendulum) {
        c.pendulum.l = undec(k.at("l"));
        c.pendulum.m = undec(k.at("m"));
        c.pendulum.g = undec(k.at("g"));
    } else {
        c.cartpole.m_p = undec(k.at("m_p"));
        c.cartpole.l = undec(k.at("l"));
        c.cartpole.m_c = undec(k.at("m_c"));
        c.cartpole.g = undec(k.at("g"));
        c.cartpole.f = undec(k.at("f"));
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Candidate and certificate serialization

Json orbit_candidate_to_json(const OrbitCandidate& candidate) {
    Json j;
    j["kind"] = "orbit_candidate";
    j["config"] = config_to_json(candidate.config);
    j["controller"] = candidate.controller_name;
    j["m"] = candidate.m;
    j["j"] = candidate.j;
    j["h_variable"] = candidate.h_variable;
    if (std::isfinite(candidate.residual)) j["residual"] = dec(candidate.residual);
    j["states"] = points_to_json(candidate.states);
    return j;
}

OrbitCandidate orbit_candidate_from_json(const Json& j) {
    OrbitCandidate c;
    c.config = config_from_json(j.at("config"));
    c.controller_name = j.at("controller").get<std::string>();
    c.m = j.at("m").get<int>();
    c.j = j.at("j").get<int>();
    c.h_variable = j.at("h_variable").get<bool>();
    if (j.contains("residual")) c.residual = undec(j.at("residual"));
    c.states = points_from_json(j.at("states"));
    if (static_cast<int>(c.states.size()) != c.m)
        throw std::invalid_argument("orbit candidate: state count does not match the period");
    return c;
}

Json certificate_to_json(const ProofCertificate& certificate) {
    Json j;
    j["kind"] = "proof_certificate";
    j["config"] = config_to_json(certificate.config);
    j["controller"] = certificate.controller_name;
    j["m"] = certificate.m;
    j["j"] = certificate.j;
    j["h_variable"] = certificate.h_variable;
    j["exact_h"] = certificate.exact_h;
    j["Y"] = dec(certificate.Y);
    j["Z0"] = dec(certificate.Z0);
    j["Z2"] = dec(certificate.Z2);
    j["r_star"] = dec(certificate.r_star);
    j["r"] = dec(certificate.r);
    j["x_bar"] = point_to_json(certificate.x_bar);
    j["h_enclosure"] = interval_to_json(certificate.h_enclosure);
    j["step_rewards"] = intervals_to_json(certificate.step_rewards);
    j["max_step_reward"] = interval_to_json(certificate.max_step_reward);
    j["contraction_ok"] = certificate.contraction_ok;
    return j;
}

ProofCertificate certificate_from_json(const Json& j) {
    ProofCertificate c;
    c.config = config_from_json(j.at("config"));
    c.controller_name = j.at("controller").get<std::string>();
    c.m = j.at("m").get<int>();
    c.j = j.at("j").get<int>();
    c.h_variable = j.at("h_variable").get<bool>();
    c.exact_h = j.at("exact_h").get<bool>();
    c.Y = undec(j.at("Y"));
    c.Z0 = undec(j.at("Z0"));
    c.Z2 = undec(j.at("Z2"));
    c.r_star = undec(j.at("r_star"));
    c.r = undec(j.at("r"));
    c.x_bar = point_from_json(j.at("x_bar"));
    c.h_enclosure = interval_from_json(j.at("h_enclosure"));
    c.step_rewards = intervals_from_json(j.at("step_rewards"));
    c.max_step_reward = interval_from_json(j.at("max_step_reward"));
    c.contraction_ok = j.at("contraction_ok").get<bool>();
    return c;
}

Json persistent_to_json(const PersistentCertificate& certificate) {
    Json j;
    j["kind"] = "persistent_certificate";
    j["config"] = config_to_json(certificate.config);
    j["controller"] = certificate.controller_name;
    j["ic"] = box_to_json(certificate.ic);
    j["steps_requested"] = certificate.steps_requested;
    j["steps_achieved"] = certificate.steps_achieved;
    Json states = Json::array();
    for (const auto& s : certificate.states) states.push_back(box_to_json(s));
    j["states"] = states;
    j["rewards"] = intervals_to_json(certificate.rewards);
    j["return_enclosure"] = interval_to_json(certificate.return_enclosure);
    j["horizon_truncated"] = certificate.horizon_truncated;
    j["abort_reason"] = certificate.abort_reason;
    j["blow_up_cap"] = dec(certificate.blow_up_cap);
    j["max_enclosure_radius"] = dec(certificate.max_enclosure_radius);
    j["escaped"] = certificate.escaped;
    Json status = Json::array();
    for (StepPersistence s : certificate.step_status) status.push_back(to_string(s));
    j["step_status"] = status;
    j["persistence_eps"] = dec(certificate.persistence_eps);
    j["T_p"] = dec(certificate.T_p);
    j["persistence_truncated"] = certificate.persistence_truncated;
    return j;
}

PersistentCertificate persistent_from_json(const Json& j) {
    PersistentCertificate c;
    c.config = config_from_json(j.at("config"));
    c.controller_name = j.at("controller").get<std::string>();
    c.ic = box_from_json(j.at("ic"));
    c.steps_requested = j.at("steps_requested").get<int>();
    c.steps_achieved = j.at("steps_achieved").get<int>();
    for (const auto& s : j.at("states")) c.states.push_back(box_from_json(s));
    c.rewards = intervals_from_json(j.at("rewards"));
    c.return_enclosure = interval_from_json(j.at("return_enclosure"));
    c.horizon_truncated = j.at("horizon_truncated").get<bool>();
    c.abort_reason = j.at("abort_reason").get<std::string>();
    c.blow_up_cap = undec(j.at("blow_up_cap"));
    c.max_enclosure_radius = undec(j.at("max_enclosure_radius"));
    c.escaped = j.at("escaped").get<bool>();
    for (const auto& s : j.at("step_status")) {
        const std::string name = s.get<std::string>();
        if (name == "excluded") c.step_status.push_back(StepPersistence::Excluded);
        else if (name == "inside") c.step_status.push_back(StepPersistence::Inside);
        else if (name == "indeterminate") c.step_status.push_back(StepPersistence::Indeterminate);
        else throw std::invalid_argument("unknown step status: " + name);
    }
    c.persistence_eps = undec(j.at("persistence_eps"));
    c.T_p = undec(j.at("T_p"));
    c.persistence_truncated = j.at("persistence_truncated").get<bool>();
    return c;
}

Json search_candidates_to_json(const std::vector<Candidate>& candidates) {
    Json a = Json::array();
    for (const Candidate& c : candidates) {
        Json j;
        j["ic"] = point_to_json(c.ic);
        j["accumulated_penalty"] = dec(c.accumulated_penalty);
        j["restart_index"] = c.restart_index;
        a.push_back(j);
    }
    return a;
}

std::vector<Candidate> search_candidates_from_json(const Json& j) {
    std::vector<Candidate> out;
    for (const auto& e : j) {
        Candidate c;
        c.ic = point_from_json(e.at("ic"));
        c.accumulated_penalty = undec(e.at("accumulated_penalty"));
        c.restart_index = e.at("restart_index").get<int>();
        out.push_back(c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV exports

std::string trajectory_csv(const MdpConfig& config, const Trajectory& trajectory,
                           const std::string& run_id) {
    std::ostringstream out;
    if (!run_id.empty()) out << "# run_id=" << run_id << "\n";
    out << "step";
    for (const std::string& name : state_column_names(config)) out << "," << name;
    out << ",raw_action,clipped_action,reward\n";
    const int n = trajectory.steps_done();
    for (int k = 0; k <= n; ++k) {
        out << k;
        for (double v : trajectory.states[static_cast<std::size_t>(k)])
            out << "," << double_to_decimal(v);
        if (k < n) {
            out << "," << double_to_decimal(trajectory.raw_actions[static_cast<std::size_t>(k)])
                << "," << double_to_decimal(trajectory.clipped_actions[static_cast<std::size_t>(k)])
                << "," << double_to_decimal(trajectory.rewards[static_cast<std::size_t>(k)]);
        } else {
            out << ",,,";
        }
        out << "\n";
    }
    return out.str();
}

std::string enclosure_csv(const PersistentCertificate& certificate, const std::string& run_id) {
    std::ostringstream out;
    if (!run_id.empty()) out << "# run_id=" << run_id << "\n";
    const auto names = state_column_names(certificate.config);
    out << "step";
    for (const std::string& n : names) out << "," << n << "_mid";
    for (const std::string& n : names) out << "," << n << "_rad";
    out << ",reward_lo,reward_hi,status\n";
    for (std::size_t k = 0; k < certificate.states.size(); ++k) {
        const IntervalVector& box = certificate.states[k];
        out << k;
        for (std::size_t d = 0; d < box.size(); ++d) out << "," << double_to_decimal(box[d].midpoint());
        for (std::size_t d = 0; d < box.size(); ++d) out << "," << double_to_decimal(box[d].radius());
        if (k < certificate.rewards.size())
            out << "," << double_to_decimal(certificate.rewards[k].lo()) << ","
                << double_to_decimal(certificate.rewards[k].hi());
        else
            out << ",,";
        out << "," << (k < certificate.step_status.size() ? to_string(certificate.step_status[k]) : "");
        out << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Paired return metrics

ReturnsReport eval_returns(const MdpConfig& base, const ControllerSpec& controller,
                           int n_episodes, std::uint64_t seed) {
    if (n_episodes < 1) throw std::invalid_argument("eval_returns: need at least one episode");
    ReturnsReport report;
    report.n_episodes = n_episodes;

    // One IC list, shared by all cells, so discrepancies are paired per IC.
    InitialDistribution rho0 = base.episode_distribution();
    std::vector<std::vector<double>> ics;
    ics.reserve(static_cast<std::size_t>(n_episodes));
    for (int e = 0; e < n_episodes; ++e) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(e)));
        ics.push_back(rho0.sample(rng));
    }

    auto fn = controller.as_fn();
    const double hs[2] = {base.h, base.h / 2.0};
    const Scheme schemes[2] = {Scheme::Explicit, Scheme::SemiImplicit};
    for (double h : hs) {
        for (Scheme scheme : schemes) {
            MdpConfig cfg = base;
            cfg.scheme = scheme;
            cfg.h = h;
            ReturnCell cell;
            cell.scheme = scheme;
            cell.h = h;
            std::vector<double> penalties;
            penalties.reserve(ics.size());
            for (const auto& ic : ics) {
                Trajectory traj = rollout(cfg, fn, ic, cfg.episode_len);
                cell.returns.push_back(traj.return_sum);
                penalties.push_back(base.system == SystemKind::Pendulum
                                        ? -traj.return_sum
                                        : accumulated_shaped_penalty(traj));
            }
            mean_std(cell.returns, cell.mean_return, cell.std_return);
            mean_std(penalties, cell.mean_penalty, cell.std_penalty);
            report.cells.push_back(std::move(cell));
        }
    }

    for (double h : hs) {
        const ReturnCell* e_cell = nullptr;
        const ReturnCell* si_cell = nullptr;
        for (const ReturnCell& c : report.cells) {
            if (c.h != h) continue;
            (c.scheme == Scheme::Explicit ? e_cell : si_cell) = &c;
        }
        std::vector<double> diffs;
        diffs.reserve(ics.size());
        for (std::size_t i = 0; i < ics.size(); ++i)
            diffs.push_back(std::abs(e_cell->returns[i] - si_cell->returns[i]));
        DiscrepancyRow row;
        row.h = h;
        mean_std(diffs, row.mean_abs, row.std_abs);
        report.discrepancy.push_back(row);
    }
    return report;
}

std::string returns_csv(const ReturnsReport& report, const std::string& run_id) {
    std::ostringstream out;
    if (!run_id.empty()) out << "# run_id=" << run_id << "\n";
    out << "scheme,h,mean_return,std_return,mean_penalty,std_penalty\n";
    for (const ReturnCell& c : report.cells) {
        out << scheme_name(c.scheme) << "," << double_to_decimal(c.h) << ","
            << double_to_decimal(c.mean_return) << "," << double_to_decimal(c.std_return) << ","
            << double_to_decimal(c.mean_penalty) << "," << double_to_decimal(c.std_penalty) << "\n";
    }
    out << "\ndiscrepancy_h,mean_abs_diff,std_abs_diff\n";
    for (const DiscrepancyRow& d : report.discrepancy) {
        out << double_to_decimal(d.h) << "," << double_to_decimal(d.mean_abs) << ","
            << double_to_decimal(d.std_abs) << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Candidate adapters

OrbitCandidate candidate_from_period(const MdpConfig& config, const std::string& controller_name,
                                     const PeriodCandidate& period) {
    OrbitCandidate cand;
    cand.config = config;
    cand.controller_name = controller_name;
    cand.m = period.m;
    cand.j = period.j;
    cand.states = period.states;
    cand.residual = period.gap;
    return cand;
}

OrbitCandidate candidate_from_rollout(const MdpConfig& config, const ControllerSpec& controller,
                                      const std::vector<double>& ic, int m, int j) {
    if (m < 2) throw std::invalid_argument("candidate_from_rollout: period must be at least 2");
    Trajectory traj = rollout(config, controller.as_fn(), ic, m);
    if (traj.steps_done() < m)
        throw std::invalid_argument("candidate_from_rollout: trajectory terminated before one period");
    OrbitCandidate cand;
    cand.config = config;
    cand.controller_name = controller.name;
    cand.m = m;
    cand.j = j;
    cand.states.assign(traj.states.begin(), traj.states.begin() + m);
    return cand;
}

// ---------------------------------------------------------------------------
// Pipeline

PipelineResult run_pipeline(const MdpConfig& config, const ControllerSpec& controller,
                            const PipelineOptions& options) {
    PipelineResult result;
    result.threshold_M =
        options.threshold_override
            ? *options.threshold_override
            : estimate_threshold(config, controller, options.threshold_episodes,
                                 options.search.seed);

    std::vector<Candidate> found;
    if (options.search.restarts > 0)
        found = search_persistent(config, controller, options.search);
    for (const std::vector<double>& ic : options.seed_ics) {
        Candidate cand;
        cand.ic = ic;
        cand.accumulated_penalty = accumulated_penalty_value(config, controller, ic);
        cand.restart_index = -1;
        found.push_back(std::move(cand));
    }
    std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
        return a.accumulated_penalty > b.accumulated_penalty;
    });

    auto fn = controller.as_fn();
    int taken = 0;
    for (const Candidate& cand : found) {
        if (cand.accumulated_penalty < result.threshold_M) continue;
        if (taken >= options.top_k) break;
        ++taken;

        PipelineItem item;
        item.candidate = cand;

        Trajectory traj = rollout(config, fn, cand.ic, config.episode_len);
        std::vector<PeriodCandidate> periods =
            detect_periodic_candidates(traj, config.state_dim(), config.angular_index(),
                                       options.recurrence_tol,
                                       static_cast<std::size_t>(options.detect_max));
        for (const PeriodCandidate& period : periods) {
            OrbitCandidate orbit = candidate_from_period(config, controller.name, period);
            bool proved = false;
            // Fixed step size first; freeing it is the fallback when the
            // candidate's period is incommensurate with the configured h.
            for (bool h_variable : {false, true}) {
                ProveOptions popt = options.prove;
                popt.h_variable = h_variable;
                try {
                    item.proofs.push_back(prove_orbit(orbit, controller, popt));
                    proved = true;
                    break;
                } catch (const std::exception& e) {
                    item.proof_failures.push_back(
                        (h_variable ? "variable-h: " : "fixed-h: ") + std::string(e.what()));
                }
            }
            if (proved) break;
            result.any_proof_failed = true;
        }

        // Always emitted, proof or no proof.
        item.persistent =
            rigorous_rollout(config, controller, cand.ic, config.episode_len, options.blow_up_cap);
        persistence_check(item.persistent, default_persistence_eps(config.system));

        result.items.push_back(std::move(item));
    }
    return result;
}

Json pipeline_summary_to_json(const PipelineResult& result) {
    Json j;
    j["threshold_M"] = dec(result.threshold_M);
    j["any_proof_failed"] = result.any_proof_failed;
    Json items = Json::array();
    for (const PipelineItem& item : result.items) {
        Json e;
        e["ic"] = point_to_json(item.candidate.ic);
        e["accumulated_penalty"] = dec(item.candidate.accumulated_penalty);
        e["proofs"] = static_cast<int>(item.proofs.size());
        Json ms = Json::array();
        for (const ProofCertificate& c : item.proofs) ms.push_back(c.m);
        e["proven_periods"] = ms;
        e["proof_failures"] = Json(item.proof_failures);
        e["persistent_steps_achieved"] = item.persistent.steps_achieved;
        e["persistent_T_p"] = dec(item.persistent.T_p);
        items.push_back(e);
    }
    j["items"] = items;
    return j;
}

}  // namespace orbitcert
