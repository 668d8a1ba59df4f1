#pragma once

// Rigorous interval rollouts from thin initial conditions: per-step state and
// reward enclosures, return bounds, persistence margins against the
// stabilization region, and honest truncation when enclosures blow up.

#include <optional>
#include <string>
#include <vector>

#include "orbitcert/controllers.hpp"
#include "orbitcert/dynamics.hpp"
#include "orbitcert/interval.hpp"
#include "orbitcert/interval_linalg.hpp"
#include "orbitcert/search.hpp"

namespace orbitcert {

enum class StepPersistence {
    Excluded,       // enclosure provably outside the stabilization region
    Inside,         // enclosure provably inside it
    Indeterminate,  // enclosure straddles the boundary; no claim either way
};

std::string to_string(StepPersistence s);

struct PersistentCertificate {
    MdpConfig config;
    std::string controller_name;
    IntervalVector ic;                    // thin initial condition
    int steps_requested = 0;
    int steps_achieved = 0;
    std::vector<IntervalVector> states;   // steps_achieved + 1 enclosures
    std::vector<Interval> rewards;        // steps_achieved native per-step rewards
    Interval return_enclosure;            // rigorous sum of the rewards
    bool horizon_truncated = false;       // stopped at the blow-up cap
    std::string abort_reason;             // guard failure message, if any
    double blow_up_cap = 0.0;
    double max_enclosure_radius = 0.0;
    bool escaped = false;                 // cartpole: |x| provably left [-2.4, 2.4]

    // Filled by persistence_check:
    std::vector<StepPersistence> step_status;
    double persistence_eps = 0.0;
    double T_p = 0.0;                     // first step time not provably excluded
    bool persistence_truncated = false;   // exclusion shown only up to the achieved horizon
};

/// Default blow-up cap on the state enclosure radius before the rollout stops.
inline constexpr double kDefaultBlowUpCap = 1e-1;

/// Iterates the interval step map from a thin initial condition, recording
/// per-step enclosures and native rewards. Stops early when an enclosure's
/// radius exceeds `blow_up_cap` (horizon_truncated) or a guard fires
/// (abort_reason); all recorded claims remain valid for the achieved steps.
PersistentCertificate rigorous_rollout(const MdpConfig& config, const ControllerSpec& controller,
                                       const std::vector<double>& ic, int n_steps,
                                       double blow_up_cap = kDefaultBlowUpCap);

/// Default stabilization tolerance: the pendulum box is [0,eps] x [-eps,eps]
/// on (angle distance from the goal, angular velocity); the cartpole level is
/// on max(|x_dot|, angle distance, |theta_dot|).
double default_persistence_eps(SystemKind system);

/// Classifies every achieved step against the eps-stabilization region and
/// sets T_p to the time of the first step not provably outside it.
/// Returns per-step results; Indeterminate steps are reported, never rounded
/// to a claim.
std::vector<StepPersistence> persistence_check(PersistentCertificate& certificate, double eps);

/// Per-step persistence classification for a single state enclosure.
StepPersistence classify_persistence(const MdpConfig& config, const IntervalVector& state,
                                     double eps);

/// Rigorous bounds on the accumulated penalty over the achieved horizon.
/// The lower bound is the reportable claim; horizon_truncated on the
/// certificate marks it as a partial sum.
Interval accumulated_penalty_bounds(const PersistentCertificate& certificate,
                                    const PenaltySpec& penalty);

/// Same, with an arbitrary per-step penalty enclosure (state box -> interval);
/// exercised by calibration tests.
template <class F>
Interval accumulated_penalty_bounds_with(const PersistentCertificate& certificate, F&& step_penalty) {
    Interval total(0.0);
    for (int k = 0; k < certificate.steps_achieved; ++k)
        total = total + step_penalty(certificate.states[static_cast<std::size_t>(k)]);
    return total;
}

/// Interval enclosure of the native per-step reward at a state box, matching
/// the float rollout's convention (clipped action in the pendulum term).
Interval native_reward_enclosure(const MdpConfig& config, const ControllerSpec& controller,
                                 const IntervalVector& state);

}  // namespace orbitcert
