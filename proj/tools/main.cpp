// orbitcert: search, prove, and certify bad persistent solutions and
// periodic orbits of controlled pendulum / cartpole swing-up dynamics.
//
// Subcommands: simulate | eval-returns | search | prove | certify | tune | report
// Exit codes:  0 ok, 2 configuration error, 3 proof failures present
//              (artifacts are still written on 3).

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "orbitcert/report.hpp"

namespace fs = std::filesystem;
using namespace orbitcert;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitProofFailures = 3;

struct CommonArgs {
    std::string config_path;
    std::string system = "pendulum";
    std::string scheme;
    double h = 0.0;
    int episodes = 0;
    std::optional<bool> terminations;
    std::string controller = "landajuela_a1";
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 1;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args, bool with_controller = true) {
    cmd->set_help_flag("--help", "print this help message and exit");  // frees -h for --h
    cmd->add_option("--config", args.config_path, "MDP config JSON file (overrides the flags below)");
    cmd->add_option("--system", args.system, "pendulum | cartpole")->capture_default_str();
    cmd->add_option("--scheme", args.scheme, "explicit | semi-implicit (default: system native)");
    cmd->add_option("--h", args.h, "step size (default: system native)");
    cmd->add_option("--episodes", args.episodes, "episode length in steps (default: system native)");
    cmd->add_flag("--terminations,!--no-terminations",
                  [&args](std::int64_t count) { args.terminations = count > 0; },
                  "enable/disable the cartpole escape termination");
    if (with_controller)
        cmd->add_option("--controller", args.controller, "builtin controller name or spec JSON file")
            ->capture_default_str();
    cmd->add_option("--seed", args.seed, "RNG seed")->capture_default_str();
    cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--threads", args.threads, "worker threads for search")->capture_default_str();
}

MdpConfig resolve_config(const CommonArgs& args, std::vector<std::string>& input_files) {
    MdpConfig cfg;
    if (!args.config_path.empty()) {
        cfg = config_from_json(Json::parse(read_file(args.config_path)));
        input_files.push_back(args.config_path);
    } else if (args.system == "pendulum") {
        cfg = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05, 1000);
    } else if (args.system == "cartpole") {
        cfg = MdpConfig::cartpole_default(Scheme::Explicit, 0.01, 2000);
    } else {
        throw std::invalid_argument("unknown --system: " + args.system);
    }
    if (!args.scheme.empty()) {
        if (args.scheme == "explicit") cfg.scheme = Scheme::Explicit;
        else if (args.scheme == "semi-implicit" || args.scheme == "semi_implicit")
            cfg.scheme = Scheme::SemiImplicit;
        else throw std::invalid_argument("unknown --scheme: " + args.scheme);
    }
    if (args.h > 0.0) cfg.h = args.h;
    if (args.episodes > 0) cfg.episode_len = args.episodes;
    if (args.terminations) cfg.terminations_enabled = *args.terminations;
    cfg.validate();
    return cfg;
}

ControllerSpec resolve_controller(const CommonArgs& args, std::vector<std::string>& input_files) {
    try {
        return builtin(args.controller);
    } catch (const UnknownController&) {
        ControllerSpec spec = load_controller(args.controller);
        input_files.push_back(args.controller);
        return spec;
    }
}

std::vector<double> parse_ic(const std::string& text) {
    std::vector<double> ic;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) ic.push_back(decimal_to_double(part));
    if (ic.empty()) throw std::invalid_argument("--ic: no components parsed");
    return ic;
}

/// Collects output files for one invocation; writes the manifest last so it
/// can list the digest of everything else. Every artifact embeds the run_id.
class Bundle {
  public:
    Bundle(std::string command, const Json& config_snapshot, std::uint64_t seed,
           const std::string& out_dir, const std::vector<std::string>& input_files)
        : dir_(out_dir), t0_(std::chrono::steady_clock::now()) {
        manifest_.command = std::move(command);
        manifest_.config_snapshot = config_snapshot;
        manifest_.seed = seed;
        manifest_.run_id = make_run_id(manifest_.command, config_snapshot, seed);
        fs::create_directories(dir_);
        for (const std::string& path : input_files)
            manifest_.input_digests[path] = fnv1a64_hex(read_file(path));
    }

    const std::string& run_id() const { return manifest_.run_id; }

    void write_json(const std::string& name, Json j) {
        j["run_id"] = manifest_.run_id;
        write_text(name, j.dump(2) + "\n");
    }

    void write_text(const std::string& name, const std::string& content) {
        const fs::path path = dir_ / name;
        write_file(path.string(), content);
        manifest_.output_digests[name] = fnv1a64_hex(content);
    }

    void finish() {
        manifest_.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
                .count();
        const Json j = manifest_to_json(manifest_);
        write_file((dir_ / "manifest.json").string(), j.dump(2) + "\n");
        std::cout << "run_id " << manifest_.run_id << "  artifacts in " << dir_.string() << "\n";
    }

  private:
    fs::path dir_;
    std::chrono::steady_clock::time_point t0_;
    RunManifest manifest_;
};

// -------------------------------------------------------------------------
// Subcommand bodies

int cmd_simulate(const CommonArgs& args, const std::string& ic_text, int steps, int batch) {
    std::vector<std::string> inputs;
    MdpConfig cfg = resolve_config(args, inputs);
    ControllerSpec ctrl = resolve_controller(args, inputs);
    const int n = steps > 0 ? steps : cfg.episode_len;

    Json snapshot = config_to_json(cfg);
    snapshot["controller"] = ctrl.name.empty() ? args.controller : ctrl.name;
    Bundle bundle("simulate", snapshot, args.seed, args.out_dir, inputs);

    auto fn = ctrl.as_fn();
    if (batch > 0) {
        InitialDistribution rho0 = cfg.episode_distribution();
        std::ostringstream csv;
        csv << "# run_id=" << bundle.run_id() << "\n";
        csv << "episode";
        for (int d = 0; d < cfg.state_dim(); ++d) csv << ",ic_" << d;
        csv << ",return\n";
        double mean = 0.0;
        for (int e = 0; e < batch; ++e) {
            Rng rng(derive_seed(args.seed, static_cast<std::uint64_t>(e)));
            const std::vector<double> ic = rho0.sample(rng);
            Trajectory traj = rollout(cfg, fn, ic, n);
            mean += traj.return_sum;
            csv << e;
            for (double v : ic) csv << "," << double_to_decimal(v);
            csv << "," << double_to_decimal(traj.return_sum) << "\n";
        }
        mean /= batch;
        bundle.write_text("batch_returns.csv", csv.str());
        Json summary;
        summary["episodes"] = batch;
        summary["mean_return"] = double_to_decimal(mean);
        bundle.write_json("batch_summary.json", summary);
        std::cout << "mean return over " << batch << " episodes: " << mean << "\n";
    } else {
        const std::vector<double> ic = parse_ic(ic_text);
        Trajectory traj = rollout(cfg, fn, ic, n);
        bundle.write_text("trajectory.csv", trajectory_csv(cfg, traj, bundle.run_id()));
        std::cout << "return " << traj.return_sum << " over " << traj.steps_done() << " steps\n";
    }
    bundle.finish();
    return kExitOk;
}

int cmd_eval_returns(const CommonArgs& args, int n_episodes) {
    std::vector<std::string> inputs;
    MdpConfig cfg = resolve_config(args, inputs);
    ControllerSpec ctrl = resolve_controller(args, inputs);

    Json snapshot = config_to_json(cfg);
    snapshot["controller"] = ctrl.name.empty() ? args.controller : ctrl.name;
    snapshot["episodes"] = n_episodes;
    Bundle bundle("eval-returns", snapshot, args.seed, args.out_dir, inputs);

    ReturnsReport report = eval_returns(cfg, ctrl, n_episodes, args.seed);
    bundle.write_text("returns.csv", returns_csv(report, bundle.run_id()));
    for (const ReturnCell& c : report.cells)
        std::cout << (c.scheme == Scheme::Explicit ? "E " : "SI") << " h=" << c.h << "  mean "
                  << c.mean_return << " +- " << c.std_return << "\n";
    for (const DiscrepancyRow& d : report.discrepancy)
        std::cout << "|E-SI| h=" << d.h << "  mean " << d.mean_abs << " +- " << d.std_abs << "\n";
    bundle.finish();
    return kExitOk;
}

int cmd_search(const CommonArgs& args, int restarts, int generations) {
    std::vector<std::string> inputs;
    MdpConfig cfg = resolve_config(args, inputs);
    ControllerSpec ctrl = resolve_controller(args, inputs);

    SearchConfig search;
    search.seed = args.seed;
    search.threads = args.threads;
    if (restarts > 0) search.restarts = restarts;
    if (generations > 0) search.max_generations = generations;

    Json snapshot = config_to_json(cfg);
    snapshot["controller"] = ctrl.name.empty() ? args.controller : ctrl.name;
    snapshot["restarts"] = search.restarts;
    snapshot["max_generations"] = search.max_generations;
    Bundle bundle("search", snapshot, args.seed, args.out_dir, inputs);

    std::vector<Candidate> candidates = search_persistent(cfg, ctrl, search);
    bundle.write_json("candidates.json", Json{{"candidates", search_candidates_to_json(candidates)}});
    if (!candidates.empty())
        std::cout << "best accumulated penalty " << candidates.front().accumulated_penalty << "\n";
    bundle.finish();
    return kExitOk;
}

int cmd_prove(const CommonArgs& args, const std::string& candidate_path, double r_star,
              bool variable_h) {
    std::vector<std::string> inputs{candidate_path};
    OrbitCandidate candidate = orbit_candidate_from_json(Json::parse(read_file(candidate_path)));
    ControllerSpec ctrl = builtin(candidate.controller_name);

    Json snapshot = config_to_json(candidate.config);
    snapshot["controller"] = candidate.controller_name;
    snapshot["m"] = candidate.m;
    snapshot["j"] = candidate.j;
    Bundle bundle("prove", snapshot, args.seed, args.out_dir, inputs);

    ProveOptions options;
    options.h_variable = variable_h || candidate.h_variable;
    if (r_star > 0.0) options.r_star_ladder = {r_star, r_star / 10.0, r_star / 100.0};

    int exit_code = kExitOk;
    try {
        ProofCertificate cert = prove_orbit(candidate, ctrl, options);
        bundle.write_json("certificate.json", certificate_to_json(cert));
        std::cout << "proven m=" << cert.m << " j=" << cert.j << " r=" << cert.r
                  << " max step reward [" << cert.max_step_reward.lo() << ", "
                  << cert.max_step_reward.hi() << "]\n";
    } catch (const std::exception& e) {
        Json failure;
        failure["kind"] = "proof_failure";
        failure["error"] = e.what();
        failure["m"] = candidate.m;
        failure["j"] = candidate.j;
        bundle.write_json("proof_failure.json", failure);
        std::cerr << "proof failed: " << e.what() << "\n";
        exit_code = kExitProofFailures;
    }
    bundle.finish();
    return exit_code;
}

int cmd_certify(const CommonArgs& args, const std::string& ic_text, int steps, double cap,
                double eps) {
    std::vector<std::string> inputs;
    MdpConfig cfg = resolve_config(args, inputs);
    ControllerSpec ctrl = resolve_controller(args, inputs);
    const std::vector<double> ic = parse_ic(ic_text);
    const int n = steps > 0 ? steps : cfg.episode_len;

    Json snapshot = config_to_json(cfg);
    snapshot["controller"] = ctrl.name.empty() ? args.controller : ctrl.name;
    snapshot["ic"] = ic_text;
    Bundle bundle("certify", snapshot, args.seed, args.out_dir, inputs);

    PersistentCertificate cert = rigorous_rollout(cfg, ctrl, ic, n, cap);
    persistence_check(cert, eps > 0.0 ? eps : default_persistence_eps(cfg.system));
    bundle.write_json("persistent_certificate.json", persistent_to_json(cert));
    bundle.write_text("enclosure.csv", enclosure_csv(cert, bundle.run_id()));
    std::cout << "achieved " << cert.steps_achieved << "/" << cert.steps_requested
              << " steps, T_p " << cert.T_p
              << (cert.persistence_truncated ? " (truncated)" : "") << ", return ["
              << cert.return_enclosure.lo() << ", " << cert.return_enclosure.hi() << "]\n";
    if (!cert.abort_reason.empty()) std::cout << "aborted: " << cert.abort_reason << "\n";
    bundle.finish();
    return kExitOk;
}

int cmd_tune(const CommonArgs& args, int n_episodes, int generations) {
    std::vector<std::string> inputs;
    MdpConfig cfg = resolve_config(args, inputs);
    ControllerSpec ctrl = resolve_controller(args, inputs);

    SearchConfig search;
    search.seed = args.seed;
    search.threads = args.threads;
    search.restarts = 1;
    if (generations > 0) search.max_generations = generations;

    Json snapshot = config_to_json(cfg);
    snapshot["controller"] = ctrl.name.empty() ? args.controller : ctrl.name;
    snapshot["episodes"] = n_episodes;
    Bundle bundle("tune", snapshot, args.seed, args.out_dir, inputs);

    ControllerSpec tuned = fine_tune(ctrl, cfg, n_episodes, search);
    bundle.write_json("tuned_controller.json", controller_to_json(tuned));
    bundle.finish();
    return kExitOk;
}

int cmd_report(const CommonArgs& args, int restarts, int generations, int top_k,
               const std::vector<std::string>& seed_ics, double threshold,
               bool threshold_set) {
    std::vector<std::string> inputs;
    MdpConfig cfg = resolve_config(args, inputs);
    ControllerSpec ctrl = resolve_controller(args, inputs);

    PipelineOptions options;
    options.search.seed = args.seed;
    options.search.threads = args.threads;
    if (restarts >= 0) options.search.restarts = restarts;
    if (generations > 0) options.search.max_generations = generations;
    if (top_k > 0) options.top_k = top_k;
    for (const std::string& text : seed_ics) options.seed_ics.push_back(parse_ic(text));
    if (threshold_set) options.threshold_override = threshold;

    Json snapshot = config_to_json(cfg);
    snapshot["controller"] = ctrl.name.empty() ? args.controller : ctrl.name;
    snapshot["restarts"] = options.search.restarts;
    snapshot["top_k"] = options.top_k;
    Bundle bundle("report", snapshot, args.seed, args.out_dir, inputs);

    PipelineResult result = run_pipeline(cfg, ctrl, options);
    bundle.write_json("pipeline.json", pipeline_summary_to_json(result));
    for (std::size_t i = 0; i < result.items.size(); ++i) {
        const PipelineItem& item = result.items[i];
        const std::string tag = std::to_string(i);
        bundle.write_json("persistent_certificate_" + tag + ".json",
                          persistent_to_json(item.persistent));
        bundle.write_text("enclosure_" + tag + ".csv",
                          enclosure_csv(item.persistent, bundle.run_id()));
        for (std::size_t p = 0; p < item.proofs.size(); ++p)
            bundle.write_json("certificate_" + tag + "_" + std::to_string(p) + ".json",
                              certificate_to_json(item.proofs[p]));
    }
    std::cout << "threshold M " << result.threshold_M << ", " << result.items.size()
              << " candidates above it, proofs "
              << (result.any_proof_failed ? "with failures" : "clean") << "\n";
    bundle.finish();
    return result.any_proof_failed ? kExitProofFailures : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rigorous search, proof, and certification of bad persistent solutions "
                 "and periodic orbits of controlled pendulum / cartpole swing-up dynamics"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    CommonArgs args;
    std::string ic_text;
    std::string candidate_path;
    int steps = 0, batch = 0, n_episodes = 100, restarts = -1, generations = 0, top_k = 0;
    double r_star = 0.0, cap = kDefaultBlowUpCap, eps = 0.0, threshold = 0.0;
    bool variable_h = false;
    std::vector<std::string> seed_ics;

    CLI::App* simulate = app.add_subcommand("simulate", "Float rollout to a trajectory CSV");
    add_common_flags(simulate, args);
    simulate->add_option("--ic", ic_text, "initial condition, comma-separated");
    simulate->add_option("--steps", steps, "steps to roll out (default: episode length)");
    simulate->add_option("--batch", batch, "roll out this many sampled initial conditions instead");

    CLI::App* eval = app.add_subcommand("eval-returns",
                                        "Paired return metrics over {E, SI} x {h, h/2}");
    add_common_flags(eval, args);
    eval->add_option("--n", n_episodes, "episodes per cell")->capture_default_str();

    CLI::App* search = app.add_subcommand("search", "CMA-ES search for persistent solutions");
    add_common_flags(search, args);
    search->add_option("--restarts", restarts, "search restarts");
    search->add_option("--generations", generations, "max generations per restart");

    CLI::App* prove = app.add_subcommand("prove", "Prove a periodic orbit candidate");
    prove->add_option("--candidate", candidate_path, "orbit candidate JSON file")->required();
    prove->add_option("--r-star", r_star, "candidate radius ladder start");
    prove->add_flag("--variable-h", variable_h, "free the step size, pin the phase");
    prove->add_option("--seed", args.seed, "RNG seed");
    prove->add_option("--out", args.out_dir, "output directory")->capture_default_str();

    CLI::App* certify = app.add_subcommand("certify", "Rigorous interval rollout from a thin IC");
    add_common_flags(certify, args);
    certify->add_option("--ic", ic_text, "initial condition, comma-separated")->required();
    certify->add_option("--steps", steps, "steps to enclose (default: episode length)");
    certify->add_option("--cap", cap, "blow-up cap on enclosure radius")->capture_default_str();
    certify->add_option("--eps", eps, "persistence tolerance (default: system native)");

    CLI::App* tune = app.add_subcommand("tune", "CMA-ES fine-tuning of controller constants");
    add_common_flags(tune, args);
    tune->add_option("--n", n_episodes, "episodes in the tuning objective")->capture_default_str();
    tune->add_option("--generations", generations, "max generations");

    CLI::App* report = app.add_subcommand(
        "report", "Full pipeline: search, detect, prove, certify; writes the artifact bundle");
    add_common_flags(report, args);
    report->add_option("--restarts", restarts, "search restarts (0 skips the search)");
    report->add_option("--generations", generations, "max generations per restart");
    report->add_option("--top-k", top_k, "candidates carried past the threshold filter");
    report->add_option("--seed-ic", seed_ics,
                       "extra starting point, comma-separated (repeatable)");
    CLI::Option* threshold_opt =
        report->add_option("--threshold", threshold,
                           "badness threshold M (default: estimated from random episodes)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(args, ic_text, steps, batch);
        if (eval->parsed()) return cmd_eval_returns(args, n_episodes);
        if (search->parsed()) return cmd_search(args, restarts, generations);
        if (prove->parsed()) return cmd_prove(args, candidate_path, r_star, variable_h);
        if (certify->parsed()) return cmd_certify(args, ic_text, steps, cap, eps);
        if (tune->parsed()) return cmd_tune(args, n_episodes, generations);
        if (report->parsed())
            return cmd_report(args, restarts, generations, top_k, seed_ics, threshold,
                              threshold_opt->count() > 0);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
