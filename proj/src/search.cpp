#include "orbitcert/search.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "orbitcert/rng.hpp"

namespace orbitcert {

PenaltySpec default_penalty(SystemKind system) {
    PenaltySpec p;
    p.kind = system == SystemKind::Pendulum ? PenaltySpec::Kind::PendulumNegReward
                                            : PenaltySpec::Kind::CartpoleShaped;
    return p;
}

std::vector<double> SearchBox::project(std::vector<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
}

bool SearchBox::contains(const std::vector<double>& x) const {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
}

SearchBox default_search_box(const MdpConfig& config) {
    SearchBox box;
    if (config.system == SystemKind::Pendulum) {
        double two_pi = 2.0 * M_PI;
        box.lo = {-two_pi, -8.0};
        box.hi = {two_pi, 8.0};
    } else {
        box.lo = {-0.5, -0.5, 2.642, -0.5};
        box.hi = {0.5, 0.5, 3.642, 0.5};
    }
    return box;
}

double accumulated_penalty_value(const MdpConfig& config, const ControllerSpec& controller,
                                 const std::vector<double>& ic) {
    auto fn = controller.as_fn();
    return accumulated_penalty(config, fn, ic, config.episode_len);
}

double estimate_threshold(const MdpConfig& config, const ControllerSpec& controller, int n_random,
                          std::uint64_t seed) {
    if (n_random < 1) throw std::invalid_argument("estimate_threshold requires n_random >= 1");
    Rng rng(derive_seed(seed, 0xE57));
    InitialDistribution rho0 = config.episode_distribution();
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_random; ++i) {
        std::vector<double> ic = rho0.sample(rng);
        best = std::max(best, accumulated_penalty_value(config, controller, ic));
    }
    return best;
}

namespace {

// One CMA-ES run in box-normalized coordinates z in [0,1]^n. Maximizes the
// repaired objective; tracks the best in-box point by its true value.
struct RunResult {
    double best_value = -std::numeric_limits<double>::infinity();
    std::vector<double> best_x;
};

RunResult cma_run(const std::function<double(const std::vector<double>&)>& objective,
                  const SearchBox& box, int lambda, double sigma0, int max_generations,
                  Rng& rng) {
    const int n = static_cast<int>(box.dim());
    const int mu = lambda / 2;

    // Standard log-rank recombination weights.
    Eigen::VectorXd weights(mu);
    for (int i = 0; i < mu; ++i)
        weights(i) = std::log(mu + 0.5) - std::log(static_cast<double>(i + 1));
    weights /= weights.sum();
    const double mu_eff = 1.0 / weights.squaredNorm();

    const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    const double d_sigma =
        1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
    const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    const double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
    const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                                                ((n + 2.0) * (n + 2.0) + mu_eff));
    const double chi_n = std::sqrt(static_cast<double>(n)) *
                         (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    Eigen::VectorXd mean(n);
    for (int i = 0; i < n; ++i) mean(i) = rng.uniform();
    double sigma = sigma0;
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd p_sigma = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd p_c = Eigen::VectorXd::Zero(n);

    auto denormalize = [&](const Eigen::VectorXd& z) {
        std::vector<double> x(box.dim());
        for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = box.lo[i] + z(i) * (box.hi[i] - box.lo[i]);
        return x;
    };

    RunResult result;
    double stagnation_best = -std::numeric_limits<double>::infinity();
    int stagnant_gens = 0;
    const int stagnation_limit = 20 + (30 * n) / lambda;

    for (int gen = 0; gen < max_generations; ++gen) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
        Eigen::VectorXd D = eig.eigenvalues().cwiseMax(1e-20).cwiseSqrt();
        const Eigen::MatrixXd& B = eig.eigenvectors();
        if (D.maxCoeff() / D.minCoeff() > 1e7) break;
        if (sigma * D.maxCoeff() < 1e-11) break;

        std::vector<Eigen::VectorXd> zs(static_cast<std::size_t>(lambda));
        std::vector<Eigen::VectorXd> ys(static_cast<std::size_t>(lambda));
        std::vector<std::pair<double, int>> ranked(static_cast<std::size_t>(lambda));
        for (int k = 0; k < lambda; ++k) {
            Eigen::VectorXd zk(n);
            for (int i = 0; i < n; ++i) zk(i) = rng.normal();
            Eigen::VectorXd yk = B * (D.asDiagonal() * zk);
            Eigen::VectorXd cand = mean + sigma * yk;

            // Repair by projection onto [0,1]^n; penalize the repair distance
            // so the sampler is driven back into the box.
            Eigen::VectorXd repaired = cand.cwiseMax(0.0).cwiseMin(1.0);
            double repair2 = (cand - repaired).squaredNorm();
            std::vector<double> x = denormalize(repaired);
            double value = objective(x);
            if (value > result.best_value) {
                result.best_value = value;
                result.best_x = x;
            }
            double penalized = value - 1e6 * repair2;
            zs[static_cast<std::size_t>(k)] = zk;
            ys[static_cast<std::size_t>(k)] = yk;
            ranked[static_cast<std::size_t>(k)] = {penalized, k};
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });

        Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd z_w = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < mu; ++i) {
            int k = ranked[static_cast<std::size_t>(i)].second;
            y_w += weights(i) * ys[static_cast<std::size_t>(k)];
            z_w += weights(i) * zs[static_cast<std::size_t>(k)];
        }
        mean += sigma * y_w;

        p_sigma = (1.0 - c_sigma) * p_sigma +
                  std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * (B * z_w);
        double ps_norm = p_sigma.norm();
        bool h_sigma = ps_norm / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * (gen + 1))) <
                       (1.4 + 2.0 / (n + 1.0)) * chi_n;
        p_c = (1.0 - c_c) * p_c +
              (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0) * y_w;

        Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < mu; ++i) {
            int k = ranked[static_cast<std::size_t>(i)].second;
            const Eigen::VectorXd& yk = ys[static_cast<std::size_t>(k)];
            rank_mu += weights(i) * (yk * yk.transpose());
        }
        double c1a = c_1 * (1.0 - (h_sigma ? 0.0 : 1.0) * c_c * (2.0 - c_c));
        C = (1.0 - c1a - c_mu) * C + c_1 * (p_c * p_c.transpose()) + c_mu * rank_mu;

        sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));

        if (result.best_value > stagnation_best + 1e-12) {
            stagnation_best = result.best_value;
            stagnant_gens = 0;
        } else if (++stagnant_gens > stagnation_limit) {
            break;
        }
    }
    return result;
}

}  // namespace

std::vector<Candidate> cmaes_maximize(const std::function<double(const std::vector<double>&)>& objective,
                                      const SearchBox& box, const SearchConfig& config) {
    const int n = static_cast<int>(box.dim());
    const int lambda = config.lambda > 0
                           ? config.lambda
                           : 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(n))));
    std::vector<Candidate> per_restart(static_cast<std::size_t>(config.restarts));

    auto run_one = [&](int restart) {
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(restart)));
        RunResult r = cma_run(objective, box, lambda, config.sigma0, config.max_generations, rng);
        Candidate c;
        c.ic = r.best_x;
        c.accumulated_penalty = r.best_value;
        c.restart_index = restart;
        per_restart[static_cast<std::size_t>(restart)] = c;
    };

    if (config.threads > 1) {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        int n_threads = std::min(config.threads, config.restarts);
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    int r = next.fetch_add(1);
                    if (r >= config.restarts) return;
                    run_one(r);
                }
            });
        for (std::thread& t : pool) t.join();
    } else {
        for (int r = 0; r < config.restarts; ++r) run_one(r);
    }

    std::vector<Candidate> out;
    for (Candidate& c : per_restart)
        if (!c.ic.empty()) out.push_back(std::move(c));
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (a.accumulated_penalty != b.accumulated_penalty)
            return a.accumulated_penalty > b.accumulated_penalty;
        return a.restart_index < b.restart_index;
    });
    return out;
}

std::vector<Candidate> search_persistent(const MdpConfig& config, const ControllerSpec& controller,
                                         const SearchConfig& search) {
    SearchBox box = default_search_box(config);
    auto objective = [&](const std::vector<double>& ic) {
        return accumulated_penalty_value(config, controller, ic);
    };
    return cmaes_maximize(objective, box, search);
}

std::pair<double, int> recurrence_gap(const std::vector<double>& s_i, const std::vector<double>& s_k,
                                      int angular_index) {
    double base = 0.0;
    for (std::size_t d = 0; d < s_i.size(); ++d)
        if (static_cast<int>(d) != angular_index)
            base = std::max(base, std::abs(s_k[d] - s_i[d]));
    double best_gap = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (int j = -3; j <= 3; ++j) {
        double ang = std::abs(s_k[static_cast<std::size_t>(angular_index)] -
                              s_i[static_cast<std::size_t>(angular_index)] - 2.0 * M_PI * j);
        double gap = std::max(base, ang);
        // Ties break towards fewer whole turns: a symmetric residual is not
        // evidence of a turn.
        if (gap < best_gap || (gap == best_gap && std::abs(j) < std::abs(best_j))) {
            best_gap = gap;
            best_j = j;
        }
    }
    return {best_gap, best_j};
}

namespace {

struct RawRecurrence {
    std::size_t i;
    int m;
    int j;
    double gap;
};

std::vector<RawRecurrence> scan_recurrences(const Trajectory& trajectory, int angular_index,
                                            double tol, double& min_gap) {
    const auto& s = trajectory.states;
    std::vector<RawRecurrence> hits;
    min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 2; k < s.size(); ++k) {
        for (std::size_t i = 0; i + 2 <= k; ++i) {
            auto [gap, j] = recurrence_gap(s[i], s[k], angular_index);
            min_gap = std::min(min_gap, gap);
            if (gap <= tol) hits.push_back({i, static_cast<int>(k - i), j, gap});
        }
    }
    return hits;
}

PeriodCandidate materialize(const Trajectory& trajectory, const RawRecurrence& r) {
    PeriodCandidate c;
    c.m = r.m;
    c.j = r.j;
    c.gap = r.gap;
    c.start_index = r.i;
    c.states.assign(trajectory.states.begin() + static_cast<std::ptrdiff_t>(r.i),
                    trajectory.states.begin() + static_cast<std::ptrdiff_t>(r.i + static_cast<std::size_t>(r.m)));
    return c;
}

}  // namespace

std::optional<PeriodCandidate> detect_periodic_candidate(const Trajectory& trajectory,
                                                         int /*state_dim*/, int angular_index,
                                                         double tol) {
    if (trajectory.states.size() < 3) return std::nullopt;
    double min_gap = 0.0;
    std::vector<RawRecurrence> hits = scan_recurrences(trajectory, angular_index, tol, min_gap);
    if (hits.empty()) return std::nullopt;
    // Among near-ties (within one order of magnitude of the best gap), prefer
    // the fundamental period over its multiples.
    double tie_band = std::max(min_gap * 10.0, 1e-14);
    const RawRecurrence* best = nullptr;
    for (const RawRecurrence& h : hits) {
        if (h.gap > tie_band) continue;
        if (best == nullptr || h.m < best->m || (h.m == best->m && h.gap < best->gap)) best = &h;
    }
    if (best == nullptr) {
        for (const RawRecurrence& h : hits)
            if (best == nullptr || h.gap < best->gap) best = &h;
    }
    return materialize(trajectory, *best);
}

std::vector<PeriodCandidate> detect_periodic_candidates(const Trajectory& trajectory,
                                                        int /*state_dim*/, int angular_index,
                                                        double tol, std::size_t max_out) {
    std::vector<PeriodCandidate> out;
    if (trajectory.states.size() < 3) return out;
    double min_gap = 0.0;
    std::vector<RawRecurrence> hits = scan_recurrences(trajectory, angular_index, tol, min_gap);
    std::sort(hits.begin(), hits.end(), [](const RawRecurrence& a, const RawRecurrence& b) {
        if (a.gap != b.gap) return a.gap < b.gap;
        if (a.m != b.m) return a.m < b.m;
        return a.i < b.i;
    });
    for (const RawRecurrence& h : hits) {
        bool seen = false;
        for (const PeriodCandidate& c : out)
            if (c.m == h.m && c.j == h.j) {
                seen = true;
                break;
            }
        if (seen) continue;
        out.push_back(materialize(trajectory, h));
        if (out.size() >= max_out) break;
    }
    return out;
}

ControllerSpec fine_tune(const ControllerSpec& spec, const MdpConfig& config, int n_episodes,
                         const SearchConfig& search) {
    if (spec.variant != ControllerVariant::ExpressionTree)
        throw NoFreeConstants("fine_tune requires an expression-tree controller");
    std::vector<int> const_idx = spec.constant_indices();
    if (const_idx.empty())
        throw NoFreeConstants("controller has no constants to tune");

    // Fixed evaluation set: the same initial conditions for every candidate.
    Rng rng(derive_seed(search.seed, 0xF17E));
    InitialDistribution rho0 = config.episode_distribution();
    std::vector<std::vector<double>> ics;
    ics.reserve(static_cast<std::size_t>(n_episodes));
    for (int e = 0; e < n_episodes; ++e) ics.push_back(rho0.sample(rng));

    auto mean_return = [&](const ControllerSpec& c) {
        auto fn = c.as_fn();
        double total = 0.0;
        for (const std::vector<double>& ic : ics)
            total += rollout(config, fn, ic, config.episode_len).return_sum;
        return total / static_cast<double>(ics.size());
    };

    std::vector<double> c0(const_idx.size());
    for (std::size_t i = 0; i < const_idx.size(); ++i)
        c0[i] = spec.nodes[static_cast<std::size_t>(const_idx[i])].value;

    SearchBox box;
    box.lo.resize(c0.size());
    box.hi.resize(c0.size());
    for (std::size_t i = 0; i < c0.size(); ++i) {
        double half_width = std::abs(c0[i]) + 1.0;
        box.lo[i] = c0[i] - half_width;
        box.hi[i] = c0[i] + half_width;
    }

    auto objective = [&](const std::vector<double>& constants) {
        return mean_return(with_constants(spec, constants));
    };

    double baseline = mean_return(spec);
    std::vector<Candidate> found = cmaes_maximize(objective, box, search);
    if (!found.empty() && found.front().accumulated_penalty > baseline)
        return with_constants(spec, found.front().ic);
    return spec;
}

}  // namespace orbitcert
