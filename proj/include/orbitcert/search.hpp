#pragma once

// Black-box search machinery: CMA-ES maximization of accumulated penalties
// over initial conditions, penalty threshold estimation, near-recurrence
// detection in trajectories, and controller constant fine-tuning.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "orbitcert/controllers.hpp"
#include "orbitcert/dynamics.hpp"

namespace orbitcert {

struct NoFreeConstants : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PenaltySpec {
    enum class Kind { PendulumNegReward, CartpoleShaped };
    Kind kind = Kind::PendulumNegReward;
    double threshold_M = 0.0;
};

PenaltySpec default_penalty(SystemKind system);

struct SearchBox {
    std::vector<double> lo, hi;

    std::size_t dim() const { return lo.size(); }
    std::vector<double> project(std::vector<double> x) const;
    bool contains(const std::vector<double>& x) const;
};

/// Initial-condition box the persistent-solution search explores.
SearchBox default_search_box(const MdpConfig& config);

struct SearchConfig {
    int restarts = 50;
    int lambda = 0;            // 0 = 4 + floor(3 ln n)
    double sigma0 = 0.3;       // initial step size, box widths normalized to 1
    int max_generations = 150;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct Candidate {
    std::vector<double> ic;
    double accumulated_penalty = 0.0;
    int restart_index = -1;
};

/// Accumulated penalty of one episode: pendulum uses the negated return,
/// cartpole the shaped upright/velocity penalty summed over the horizon.
double accumulated_penalty_value(const MdpConfig& config, const ControllerSpec& controller,
                                 const std::vector<double>& ic);

/// Largest accumulated penalty over n episodes with initial states drawn from
/// the config's default initial distribution. Used as the badness threshold M.
double estimate_threshold(const MdpConfig& config, const ControllerSpec& controller,
                          int n_random, std::uint64_t seed);

/// Maximizes `objective` over `box` with restarted (mu/mu_w, lambda)-CMA-ES.
/// Points leaving the box are repaired by projection, with a quadratic penalty
/// on the repair distance steering the sampler back inside. Returns one best
/// candidate per restart, sorted by objective value descending (ties broken by
/// restart index); bit-identical re-runs under the same seed.
std::vector<Candidate> cmaes_maximize(const std::function<double(const std::vector<double>&)>& objective,
                                      const SearchBox& box, const SearchConfig& config);

/// Convenience wrapper: search initial conditions maximizing the accumulated
/// penalty of `controller` under `config`.
std::vector<Candidate> search_persistent(const MdpConfig& config, const ControllerSpec& controller,
                                         const SearchConfig& search);

struct PeriodCandidate {
    int m = 0;                                  // period in steps
    int j = 0;                                  // signed whole turns of the angular coordinate
    double gap = 0.0;                           // recurrence gap, infinity norm
    std::size_t start_index = 0;                // index of the first cycle state
    std::vector<std::vector<double>> states;    // the m cycle states, time ordered
};

/// Recurrence gap between two states modulo whole angular turns:
/// min over j in [-3,3] of the infinity norm of s_k - s_i - 2*pi*j*e_angular.
/// Also reports the minimizing j.
std::pair<double, int> recurrence_gap(const std::vector<double>& s_i, const std::vector<double>& s_k,
                                      int angular_index);

/// Scans all index pairs i < k of the trajectory for the smallest recurrence
/// gap; returns the sub-trajectory between them when the gap is at most `tol`.
/// Among pairs within an order of magnitude of the smallest gap, the shortest
/// period wins, so an almost-periodic tail reports the fundamental period
/// rather than a multiple of it.
std::optional<PeriodCandidate> detect_periodic_candidate(const Trajectory& trajectory, int state_dim,
                                                         int angular_index, double tol = 0.05);

/// All distinct (period, turns) recurrences with gap <= tol, best gap first.
std::vector<PeriodCandidate> detect_periodic_candidates(const Trajectory& trajectory, int state_dim,
                                                        int angular_index, double tol,
                                                        std::size_t max_out);

/// CMA-ES over the constant leaves of an expression-tree controller,
/// maximizing the mean return over `n_episodes` fixed initial conditions.
/// Returns the input spec unchanged unless a strict improvement was found;
/// throws NoFreeConstants if the tree has no constants to tune.
ControllerSpec fine_tune(const ControllerSpec& spec, const MdpConfig& config, int n_episodes,
                         const SearchConfig& search);

}  // namespace orbitcert
