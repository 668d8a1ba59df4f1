#include "orbitcert/certify.hpp"

#include <algorithm>
#include <cmath>

namespace orbitcert {

std::string to_string(StepPersistence s) {
    switch (s) {
        case StepPersistence::Excluded: return "excluded";
        case StepPersistence::Inside: return "inside";
        case StepPersistence::Indeterminate: return "indeterminate";
    }
    throw std::logic_error("unreachable persistence status");
}

Interval native_reward_enclosure(const MdpConfig& config, const ControllerSpec& controller,
                                 const IntervalVector& state) {
    std::vector<Interval> s = state.entries();
    if (config.system == SystemKind::Pendulum) {
        std::vector<Interval> obs = compute_observation<Interval>(config.system, s);
        Interval raw = controller.eval(obs);
        Interval action = clip_and_scale_action<Interval>(config, raw);
        return native_reward<Interval>(config, s, action);
    }
    return cartpole_reward<Interval>(s);
}

PersistentCertificate rigorous_rollout(const MdpConfig& config, const ControllerSpec& controller,
                                       const std::vector<double>& ic, int n_steps,
                                       double blow_up_cap) {
    PersistentCertificate cert;
    cert.config = config;
    cert.controller_name = controller.name;
    cert.ic = IntervalVector::thin(ic);
    cert.steps_requested = n_steps;
    cert.blow_up_cap = blow_up_cap;
    cert.return_enclosure = Interval(0.0);

    auto fn = controller.as_fn();
    IntervalVector current = cert.ic;
    cert.states.push_back(current);
    cert.max_enclosure_radius = current.max_radius();

    for (int k = 0; k < n_steps; ++k) {
        Interval reward(0.0);
        std::vector<Interval> next;
        try {
            reward = native_reward_enclosure(config, controller, current);
            next = step(config, current.entries(), fn);
        } catch (const NonSmoothCrossing& e) {
            cert.abort_reason = e.what();
            break;
        } catch (const DomainError& e) {
            cert.abort_reason = e.what();
            break;
        } catch (const DivisionByZeroInterval& e) {
            cert.abort_reason = e.what();
            break;
        }
        cert.rewards.push_back(reward);
        cert.return_enclosure = cert.return_enclosure + reward;
        current = IntervalVector(std::move(next));
        cert.states.push_back(current);
        cert.steps_achieved = k + 1;
        cert.max_enclosure_radius = std::max(cert.max_enclosure_radius, current.max_radius());

        if (config.system == SystemKind::CartpoleSwingup) {
            const Interval& x = current[0];
            if (x.lo() > config.x_escape || x.hi() < -config.x_escape) cert.escaped = true;
        }
        if (current.max_radius() > blow_up_cap) {
            cert.horizon_truncated = true;
            break;
        }
    }
    if (cert.steps_achieved < n_steps && cert.abort_reason.empty() && !cert.horizon_truncated)
        cert.horizon_truncated = true;  // defensive; loop exits only via the cases above
    return cert;
}

double default_persistence_eps(SystemKind system) {
    return system == SystemKind::Pendulum ? 1e-2 : 0.036;
}

StepPersistence classify_persistence(const MdpConfig& config, const IntervalVector& state,
                                     double eps) {
    if (config.system == SystemKind::Pendulum) {
        Interval wrapped = wrap_angle(state[0]);
        const Interval& omega = state[1];
        bool excluded = wrapped.lo() > eps || omega.lo() > eps || omega.hi() < -eps;
        if (excluded) return StepPersistence::Excluded;
        bool inside = wrapped.hi() <= eps && omega.lo() >= -eps && omega.hi() <= eps;
        return inside ? StepPersistence::Inside : StepPersistence::Indeterminate;
    }
    Interval x_dot = abs(state[1]);
    Interval wrapped = wrap_angle(state[2]);
    Interval theta_dot = abs(state[3]);
    bool excluded = x_dot.lo() > eps || wrapped.lo() > eps || theta_dot.lo() > eps;
    if (excluded) return StepPersistence::Excluded;
    bool inside = x_dot.hi() <= eps && wrapped.hi() <= eps && theta_dot.hi() <= eps;
    return inside ? StepPersistence::Inside : StepPersistence::Indeterminate;
}

std::vector<StepPersistence> persistence_check(PersistentCertificate& certificate, double eps) {
    certificate.persistence_eps = eps;
    certificate.step_status.clear();
    const double h = certificate.config.h;
    const std::size_t n_states = certificate.states.size();
    certificate.step_status.reserve(n_states);
    bool found_boundary = false;
    double t_p = static_cast<double>(certificate.steps_achieved) * h;
    for (std::size_t k = 0; k < n_states; ++k) {
        StepPersistence s = classify_persistence(certificate.config, certificate.states[k], eps);
        certificate.step_status.push_back(s);
        if (!found_boundary && s != StepPersistence::Excluded) {
            found_boundary = true;
            t_p = static_cast<double>(k) * h;
        }
    }
    certificate.T_p = t_p;
    certificate.persistence_truncated =
        !found_boundary && certificate.steps_achieved < certificate.steps_requested;
    return certificate.step_status;
}

Interval accumulated_penalty_bounds(const PersistentCertificate& certificate,
                                    const PenaltySpec& penalty) {
    if (penalty.kind == PenaltySpec::Kind::PendulumNegReward) return -certificate.return_enclosure;
    return accumulated_penalty_bounds_with(certificate, [](const IntervalVector& state) {
        return cartpole_shaped_penalty<Interval>(state.entries());
    });
}

}  // namespace orbitcert
