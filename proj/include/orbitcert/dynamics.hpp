#pragma once

// Controlled pendulum and cartpole swing-up dynamics under explicit and
// semi-implicit Euler one-step maps, generic over the scalar kind (double,
// Interval, or Jet of either), plus float-kind rollouts with rewards.
//
// Conventions baked in here:
//  - The state angle is never wrapped; angle equivalence is handled only by
//    the reward/persistence functions through arccos(cos(theta)).
//  - The controller output is clipped to the control range (then scaled for
//    the cartpole) before entering the dynamics, and the *clipped* action is
//    what the reward's action-cost term sees.
//  - Explicit Euler advances every component from the old state;
//    semi-implicit Euler advances velocities first and then positions using
//    the new velocities.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "orbitcert/interval.hpp"
#include "orbitcert/jet.hpp"
#include "orbitcert/rng.hpp"

namespace orbitcert {

enum class SystemKind { Pendulum, CartpoleSwingup };
enum class Scheme { Explicit, SemiImplicit };

std::string to_string(SystemKind s);
std::string to_string(Scheme s);
SystemKind system_from_string(const std::string& s);
Scheme scheme_from_string(const std::string& s);

struct PendulumConstants {
    double l = 1.0;
    double m = 1.0;
    double g = 10.0;
};

struct CartpoleConstants {
    double m_p = 0.5;  // pole mass
    double l = 0.6;    // pole length
    double m_c = 0.5;  // cart mass
    double g = 9.82;
    double f = 0.1;  // cart friction coefficient
};

struct ClipRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Per-dimension ranges of the initial-state distribution used for episode
/// metrics. Defaults follow the benchmark environments and are overridable.
struct InitialDistribution {
    std::vector<ClipRange> ranges;

    std::vector<double> sample(Rng& rng) const {
        std::vector<double> s(ranges.size());
        for (std::size_t i = 0; i < ranges.size(); ++i) s[i] = rng.uniform(ranges[i].lo, ranges[i].hi);
        return s;
    }
};

struct MdpConfig {
    SystemKind system = SystemKind::Pendulum;
    Scheme scheme = Scheme::SemiImplicit;
    double h = 0.05;
    int episode_len = 1000;

    PendulumConstants pendulum;
    CartpoleConstants cartpole;

    ClipRange control_clip{-2.0, 2.0};
    double control_scale = 1.0;
    std::optional<ClipRange> velocity_clip = ClipRange{-8.0, 8.0};
    double x_escape = 2.4;
    bool terminations_enabled = true;

    /// Episode initial-state distribution override; the benchmark default
    /// applies when unset.
    std::optional<InitialDistribution> initial_distribution;

    static MdpConfig pendulum_default(Scheme scheme, double h, int episode_len = 1000);
    static MdpConfig cartpole_default(Scheme scheme, double h, int episode_len = 2000);

    int state_dim() const { return system == SystemKind::Pendulum ? 2 : 4; }
    int angular_index() const { return system == SystemKind::Pendulum ? 0 : 2; }

    InitialDistribution default_initial_distribution() const;

    /// The distribution episodes actually sample from: the override when
    /// present, the benchmark default otherwise.
    InitialDistribution episode_distribution() const {
        return initial_distribution ? *initial_distribution : default_initial_distribution();
    }

    void validate() const;
};

// ---------------------------------------------------------------------------
// Scalar-kind helpers

inline void assert_provably_positive(double x, const char* what) {
    if (!(x > 0.0)) throw DomainError(std::string(what) + ": not positive");
}
inline void assert_provably_positive(const Interval& x, const char* what) {
    if (!x.strictly_positive()) throw DomainError(std::string(what) + ": not provably positive");
}
template <class S>
void assert_provably_positive(const Jet<S>& x, const char* what) {
    assert_provably_positive(x.v, what);
}

// ---------------------------------------------------------------------------
// Observations

/// Pendulum features: x0 = cos(theta), x1 = sin(theta), x2 = theta-dot.
/// Cartpole features: x0 = cart position, x1 = cart velocity, x2 = cos(theta),
/// x3 = sin(theta), x4 = theta-dot.
template <class S>
std::vector<S> compute_observation(SystemKind system, const std::vector<S>& state) {
    if (system == SystemKind::Pendulum) {
        return {cos(state[0]), sin(state[0]), state[1]};
    }
    return {state[0], state[1], cos(state[2]), sin(state[2]), state[3]};
}

// ---------------------------------------------------------------------------
// Accelerations

template <class S>
S pendulum_accel(const PendulumConstants& c, const S& theta, const S& /*omega*/, const S& u) {
    const double coef_u = 3.0 / (c.l * c.l * c.m);
    const double coef_g = 3.0 * c.g / (2.0 * c.l);
    return coef_u * u + coef_g * sin(theta);
}

/// Returns (theta-acceleration, x-acceleration). u is the scaled control
/// force. Denominator positivity is asserted on every evaluation; at the
/// default constants both denominators are bounded away from zero.
template <class S>
std::pair<S, S> cartpole_accels(const CartpoleConstants& cc, const S& theta, const S& theta_dot,
                                const S& x_dot, const S& u) {
    const double mpl = cc.m_p * cc.l;
    const double mtot = cc.m_p + cc.m_c;
    const S s = sin(theta);
    const S c = cos(theta);
    const S c2 = sqr(c);
    const S td2 = sqr(theta_dot);

    const S num1 = (-3.0 * mpl) * td2 * s * c + (6.0 * mtot * cc.g) * s + 6.0 * (u - cc.f * x_dot) * c;
    const S den1 = (4.0 * mtot * cc.l) - (3.0 * mpl) * c2;
    assert_provably_positive(den1, "cartpole angular-acceleration denominator");

    const S num2 = (-2.0 * mpl) * td2 * s + (3.0 * cc.m_p * cc.g) * s * c + 4.0 * u - (4.0 * cc.f) * x_dot;
    const S den2 = (4.0 * mtot) - (3.0 * cc.m_p) * c2;
    assert_provably_positive(den2, "cartpole linear-acceleration denominator");

    return {num1 / den1, num2 / den2};
}

// ---------------------------------------------------------------------------
// One-step maps

/// Clip the raw controller output to the control range and apply the force
/// scale (pendulum: identity scale; cartpole: x10).
template <class S>
S clip_and_scale_action(const MdpConfig& cfg, const S& raw) {
    const S clipped = clip_guarded(raw, cfg.control_clip.lo, cfg.control_clip.hi);
    if (cfg.control_scale == 1.0) return clipped;
    return clipped * cfg.control_scale;
}

/// One step of the configured system with an explicit step size argument
/// (used by the variable-step orbit encoding, where h is an unknown).
/// ctrl maps the observation vector to the raw (pre-clip) action.
template <class S, class Ctrl>
std::vector<S> step_with_h(const MdpConfig& cfg, const S& h, const std::vector<S>& state, Ctrl&& ctrl) {
    const std::size_t need = cfg.system == SystemKind::Pendulum ? 2u : 4u;
    if (state.size() != need)
        throw std::invalid_argument("step_with_h: state dimension does not match the system");
    const std::vector<S> obs = compute_observation(cfg.system, state);
    const S u = clip_and_scale_action(cfg, ctrl(obs));

    if (cfg.system == SystemKind::Pendulum) {
        const S& theta = state[0];
        const S& omega = state[1];
        const S accel = pendulum_accel(cfg.pendulum, theta, omega, u);
        if (cfg.scheme == Scheme::Explicit) {
            S theta_next = theta + h * omega;
            S omega_next = omega + h * accel;
            if (cfg.velocity_clip)
                omega_next = clip_guarded(omega_next, cfg.velocity_clip->lo, cfg.velocity_clip->hi);
            return {theta_next, omega_next};
        }
        S omega_next = omega + h * accel;
        if (cfg.velocity_clip)
            omega_next = clip_guarded(omega_next, cfg.velocity_clip->lo, cfg.velocity_clip->hi);
        S theta_next = theta + h * omega_next;
        return {theta_next, omega_next};
    }

    const S& x = state[0];
    const S& x_dot = state[1];
    const S& theta = state[2];
    const S& theta_dot = state[3];
    const auto [f1, f2] = cartpole_accels(cfg.cartpole, theta, theta_dot, x_dot, u);
    if (cfg.scheme == Scheme::Explicit) {
        return {x + h * x_dot, x_dot + h * f2, theta + h * theta_dot, theta_dot + h * f1};
    }
    S x_dot_next = x_dot + h * f2;
    S theta_dot_next = theta_dot + h * f1;
    return {x + h * x_dot_next, x_dot_next, theta + h * theta_dot_next, theta_dot_next};
}

template <class S, class Ctrl>
std::vector<S> step(const MdpConfig& cfg, const std::vector<S>& state, Ctrl&& ctrl) {
    const S h = scalar_like(state[0], cfg.h);
    return step_with_h(cfg, h, state, std::forward<Ctrl>(ctrl));
}

// ---------------------------------------------------------------------------
// Rewards and penalties

/// Wrapped angular distance to the upright position, in [0, pi]:
/// arccos(cos(theta)).
template <class S>
S wrap_angle(const S& theta) {
    return acos(cos(theta));
}

template <class S>
S pendulum_reward(const S& theta, const S& omega, const S& action) {
    return -(sqr(wrap_angle(theta)) + 0.1 * sqr(omega) + 0.001 * sqr(action));
}

template <class S>
S cartpole_reward(const std::vector<S>& state) {
    return cos(state[2]);
}

/// Shaped cartpole penalty: -cos(theta) + (theta-dot^2 + x-dot^2)/2.
/// Nonnegative "badness" that ignores the cart position.
template <class S>
S cartpole_shaped_penalty(const std::vector<S>& state) {
    return -cos(state[2]) + 0.5 * sqr(state[3]) + 0.5 * sqr(state[1]);
}

/// Native per-step reward at the pre-step state with the clipped action.
template <class S>
S native_reward(const MdpConfig& cfg, const std::vector<S>& state, const S& clipped_action) {
    if (cfg.system == SystemKind::Pendulum)
        return pendulum_reward(state[0], state[1], clipped_action);
    return cartpole_reward(state);
}

// ---------------------------------------------------------------------------
// Float rollouts

struct Trajectory {
    std::vector<std::vector<double>> states;  // steps_done + 1 entries
    std::vector<double> raw_actions;          // steps_done entries
    std::vector<double> clipped_actions;      // clipped but unscaled
    std::vector<double> rewards;              // native reward at pre-step state
    double return_sum = 0.0;
    std::optional<int> terminated_at;  // state index at which |x| escaped

    int steps_done() const { return static_cast<int>(rewards.size()); }
};

/// Plain double-precision rollout for N steps (or until cartpole
/// termination when enabled). Controllers see raw observations; rewards use
/// the clipped (unscaled) action.
template <class Ctrl>
Trajectory rollout(const MdpConfig& cfg, Ctrl&& ctrl, const std::vector<double>& ic, int n_steps) {
    Trajectory traj;
    traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.states.push_back(ic);
    std::vector<double> s = ic;
    for (int k = 0; k < n_steps; ++k) {
        const std::vector<double> obs = compute_observation(cfg.system, s);
        const double raw = ctrl(obs);
        const double clipped = clip_guarded(raw, cfg.control_clip.lo, cfg.control_clip.hi);
        const double reward = native_reward(cfg, s, clipped);
        traj.raw_actions.push_back(raw);
        traj.clipped_actions.push_back(clipped);
        traj.rewards.push_back(reward);
        traj.return_sum += reward;

        s = step(cfg, s, ctrl);
        traj.states.push_back(s);
        if (cfg.system == SystemKind::CartpoleSwingup && cfg.terminations_enabled &&
            std::abs(s[0]) > cfg.x_escape) {
            traj.terminated_at = k + 1;
            break;
        }
    }
    return traj;
}

/// Accumulated shaped penalty over the first n_steps pre-step states of an
/// (untruncated) trajectory.
double accumulated_shaped_penalty(const Trajectory& traj);

/// Accumulated penalty for a penalty-kind-agnostic search objective:
/// pendulum uses the negated native return, cartpole the shaped penalty.
template <class Ctrl>
double accumulated_penalty(const MdpConfig& cfg, Ctrl&& ctrl, const std::vector<double>& ic,
                           int n_steps) {
    const Trajectory traj = rollout(cfg, std::forward<Ctrl>(ctrl), ic, n_steps);
    if (cfg.system == SystemKind::Pendulum) return -traj.return_sum;
    return accumulated_shaped_penalty(traj);
}

/// First time (seconds) at which the wrapped trajectory enters the
/// stabilization region, or n_steps*h if it never does. Pendulum region:
/// wrap_angle(theta) <= eps and |omega| <= eps. Cartpole region: the
/// translation-invariant seminorm max(|x_dot|, wrap_angle(theta),
/// |theta_dot|) <= eps.
double first_stabilization_time(const MdpConfig& cfg, const Trajectory& traj, double eps);

}  // namespace orbitcert
