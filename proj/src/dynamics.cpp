#include "orbitcert/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace orbitcert {

std::string to_string(SystemKind s) {
    return s == SystemKind::Pendulum ? "pendulum" : "cartpole";
}

std::string to_string(Scheme s) {
    return s == Scheme::Explicit ? "explicit" : "semi-implicit";
}

SystemKind system_from_string(const std::string& s) {
    if (s == "pendulum") return SystemKind::Pendulum;
    if (s == "cartpole") return SystemKind::CartpoleSwingup;
    throw std::invalid_argument("unknown system: " + s);
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "explicit" || s == "E") return Scheme::Explicit;
    if (s == "semi-implicit" || s == "SI") return Scheme::SemiImplicit;
    throw std::invalid_argument("unknown scheme: " + s);
}

MdpConfig MdpConfig::pendulum_default(Scheme scheme, double h, int episode_len) {
    MdpConfig cfg;
    cfg.system = SystemKind::Pendulum;
    cfg.scheme = scheme;
    cfg.h = h;
    cfg.episode_len = episode_len;
    cfg.control_clip = {-2.0, 2.0};
    cfg.control_scale = 1.0;
    cfg.velocity_clip = ClipRange{-8.0, 8.0};
    cfg.terminations_enabled = false;  // the pendulum episode never terminates early
    cfg.validate();
    return cfg;
}

MdpConfig MdpConfig::cartpole_default(Scheme scheme, double h, int episode_len) {
    MdpConfig cfg;
    cfg.system = SystemKind::CartpoleSwingup;
    cfg.scheme = scheme;
    cfg.h = h;
    cfg.episode_len = episode_len;
    cfg.control_clip = {-1.0, 1.0};
    cfg.control_scale = 10.0;
    cfg.velocity_clip.reset();
    cfg.x_escape = 2.4;
    cfg.terminations_enabled = true;
    cfg.validate();
    return cfg;
}

void MdpConfig::validate() const {
    if (!(h > 0.0)) throw std::invalid_argument("MdpConfig: h must be positive");
    if (episode_len < 1) throw std::invalid_argument("MdpConfig: episode_len must be >= 1");
    if (!(control_clip.lo < control_clip.hi))
        throw std::invalid_argument("MdpConfig: control clip range must have lo < hi");
    if (velocity_clip && !(velocity_clip->lo < velocity_clip->hi))
        throw std::invalid_argument("MdpConfig: velocity clip range must have lo < hi");
    if (initial_distribution) {
        if (static_cast<int>(initial_distribution->ranges.size()) != state_dim())
            throw std::invalid_argument(
                "MdpConfig: initial distribution dimension does not match the state");
        for (const ClipRange& r : initial_distribution->ranges)
            if (!(r.lo <= r.hi))
                throw std::invalid_argument("MdpConfig: initial distribution range has lo > hi");
    }
}

InitialDistribution MdpConfig::default_initial_distribution() const {
    const double pi = 3.141592653589793;
    if (system == SystemKind::Pendulum) {
        return InitialDistribution{{{-pi, pi}, {-1.0, 1.0}}};
    }
    return InitialDistribution{{{0.0, 0.0}, {0.0, 0.0}, {pi - 0.05, pi + 0.05}, {-0.05, 0.05}}};
}

double accumulated_shaped_penalty(const Trajectory& traj) {
    double acc = 0.0;
    for (int k = 0; k < traj.steps_done(); ++k) {
        const std::vector<double>& s = traj.states[static_cast<std::size_t>(k)];
        acc += cartpole_shaped_penalty(s);
    }
    return acc;
}

double first_stabilization_time(const MdpConfig& cfg, const Trajectory& traj, double eps) {
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const std::vector<double>& s = traj.states[k];
        bool inside = false;
        if (cfg.system == SystemKind::Pendulum) {
            inside = wrap_angle(s[0]) <= eps && std::abs(s[1]) <= eps;
        } else {
            const double seminorm =
                std::max({std::abs(s[1]), wrap_angle(s[2]), std::abs(s[3])});
            inside = seminorm <= eps;
        }
        if (inside) return static_cast<double>(k) * cfg.h;
    }
    return static_cast<double>(traj.states.size() - 1) * cfg.h;
}

}  // namespace orbitcert
