#pragma once

// Periodic-orbit proofs: encode an orbit as the zero of a closure/chain map,
// refine it with damped Newton, and certify existence and local uniqueness
// with rigorous contraction bounds (Y, Z0, Z2 and a proven radius r).

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "orbitcert/controllers.hpp"
#include "orbitcert/dynamics.hpp"
#include "orbitcert/interval.hpp"
#include "orbitcert/interval_linalg.hpp"
#include "orbitcert/jet.hpp"

namespace orbitcert {

struct SingularJacobian : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoConvergence : std::runtime_error {
    NoConvergence(const std::string& what, double residual_)
        : std::runtime_error(what), residual(residual_) {}
    double residual;
};
struct ContractionFailed : std::runtime_error {
    ContractionFailed(const std::string& what, double Y_, double Z0_, double Z2_, double r_star_)
        : std::runtime_error(what), Y(Y_), Z0(Z0_), Z2(Z2_), r_star(r_star_) {}
    double Y, Z0, Z2, r_star;
};
struct SmoothnessUnverifiable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OrbitCandidate {
    MdpConfig config;
    std::string controller_name;
    int m = 0;                                // period in steps
    int j = 0;                                // signed whole angular turns
    std::vector<std::vector<double>> states;  // m states, time ordered
    bool h_variable = false;
    double residual = std::numeric_limits<double>::quiet_NaN();
};

struct ProofCertificate {
    MdpConfig config;
    std::string controller_name;
    int m = 0;
    int j = 0;
    bool h_variable = false;
    bool exact_h = true;
    double Y = std::numeric_limits<double>::infinity();
    double Z0 = std::numeric_limits<double>::infinity();
    double Z2 = std::numeric_limits<double>::infinity();
    double r_star = 0.0;
    double r = std::numeric_limits<double>::infinity();
    std::vector<double> x_bar;     // flattened states; leading h when h_variable
    Interval h_enclosure;          // thin [h, h] when exact_h
    std::vector<Interval> step_rewards;
    Interval max_step_reward;
    bool contraction_ok = false;

    int state_dim() const { return config.state_dim(); }
    /// k-th orbit state as a point (midpoint data of the proof).
    std::vector<double> state(int k) const;
    int x_offset() const { return h_variable ? 1 : 0; }
};

/// 2*pi*j in the matching scalar kind (rigorous enclosure for interval kinds).
inline double two_pi_turns(const double&, int j) { return 2.0 * M_PI * j; }
inline Interval two_pi_turns(const Interval&, int j) {
    return two_pi_interval() * static_cast<double>(j);
}
template <class S>
Jet<S> two_pi_turns(const Jet<S>& exemplar, int j) {
    return Jet<S>(two_pi_turns(exemplar.v, j), exemplar.d.size());
}

/// The orbit map whose zeros are periodic orbits.
///
/// Fixed-h layout, X = (x_0, ..., x_{m-1}):
///   block 0:      x_0 - g(x_{m-1}) + 2*pi*j * e_angular   (closure)
///   block i >= 1: x_i - g(x_{i-1})                        (chain)
///
/// Variable-h layout, X = (h, x_0, ..., x_{m-1}):
///   row 0:        theta_0 - anchor                        (phase condition)
///   then the closure and chain blocks with h taken from X.
class OrbitMap {
  public:
    OrbitMap(MdpConfig config, ControllerSpec controller, int m, int j, bool h_variable = false,
             double anchor = 0.0)
        : config_(std::move(config)),
          controller_(std::move(controller)),
          m_(m),
          j_(j),
          h_variable_(h_variable),
          anchor_(anchor) {
        if (m_ < 2) throw std::invalid_argument("orbit period must be at least 2 steps");
    }

    int dim() const { return config_.state_dim() * m_ + (h_variable_ ? 1 : 0); }
    int period() const { return m_; }
    int turns() const { return j_; }
    bool h_variable() const { return h_variable_; }
    double anchor() const { return anchor_; }
    const MdpConfig& config() const { return config_; }
    const ControllerSpec& controller() const { return controller_; }

    template <class S>
    std::vector<S> operator()(const std::vector<S>& X) const {
        const int p = config_.state_dim();
        const int off = h_variable_ ? 1 : 0;
        const int a = config_.angular_index();
        if (static_cast<int>(X.size()) != dim())
            throw std::invalid_argument("orbit map input has wrong dimension");
        S h = h_variable_ ? X[0] : scalar_like(X[0], config_.h);
        auto fn = controller_.as_fn();

        std::vector<S> out(X.size(), scalar_like(X[0], 0.0));
        if (h_variable_) out[0] = X[static_cast<std::size_t>(1 + a)] - anchor_;
        for (int i = 0; i < m_; ++i) {
            const int q = (i + m_ - 1) % m_;  // predecessor state index
            std::vector<S> xq(X.begin() + off + q * p, X.begin() + off + (q + 1) * p);
            std::vector<S> g = step_with_h(config_, h, xq, fn);
            for (int c = 0; c < p; ++c) {
                S res = X[static_cast<std::size_t>(off + i * p + c)] - g[static_cast<std::size_t>(c)];
                if (i == 0 && c == a && j_ != 0) res = res + two_pi_turns(X[0], j_);
                out[static_cast<std::size_t>(off + i * p + c)] = res;
            }
        }
        return out;
    }

  private:
    MdpConfig config_;
    ControllerSpec controller_;
    int m_;
    int j_;
    bool h_variable_;
    double anchor_;
};

OrbitMap build_G1(const MdpConfig& config, const ControllerSpec& controller, int m, int j);
OrbitMap build_G2(const MdpConfig& config, const ControllerSpec& controller, int m, int j,
                  double anchor);

struct NewtonResult {
    std::vector<double> x;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

double residual_norm(const std::vector<double>& g);

/// Damped Newton on a square map: full step first, halved until the residual
/// decreases; stops at residual <= tol or after max_iters iterations.
/// Throws SingularJacobian when the Jacobian is not invertible and
/// NoConvergence (with the best residual) when the tolerance is not reached.
template <class F>
NewtonResult newton_refine(F&& G, std::vector<double> x0, double tol = 1e-12, int max_iters = 50) {
    NewtonResult best;
    best.x = x0;
    best.residual = residual_norm(G(x0));
    if (best.residual <= tol) {
        best.converged = true;
        return best;
    }
    std::vector<double> x = x0;
    double res = best.residual;
    for (int iter = 1; iter <= max_iters; ++iter) {
        Eigen::MatrixXd J = jacobian_float(G, x);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible())
            throw SingularJacobian("orbit map Jacobian is singular at the current iterate");
        std::vector<double> gx = G(x);
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(gx.size()));
        for (std::size_t i = 0; i < gx.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = gx[i];
        Eigen::VectorXd delta = lu.solve(rhs);

        double damping = 1.0;
        std::vector<double> x_next = x;
        double res_next = res;
        for (int halvings = 0; halvings < 25; ++halvings) {
            std::vector<double> trial = x;
            for (std::size_t i = 0; i < trial.size(); ++i)
                trial[i] -= damping * delta(static_cast<Eigen::Index>(i));
            double trial_res = residual_norm(G(trial));
            if (trial_res < res || halvings == 24) {
                x_next = std::move(trial);
                res_next = trial_res;
                break;
            }
            damping *= 0.5;
        }
        x = std::move(x_next);
        res = res_next;
        if (res < best.residual) {
            best.x = x;
            best.residual = res;
        }
        best.iterations = iter;
        if (res <= tol) {
            best.converged = true;
            return best;
        }
    }
    throw NoConvergence("Newton did not reach tolerance " + std::to_string(tol) +
                            "; best residual " + std::to_string(best.residual),
                        best.residual);
}

struct ContractionBounds {
    double Y = std::numeric_limits<double>::infinity();
    double Z0 = std::numeric_limits<double>::infinity();
    double Z2 = std::numeric_limits<double>::infinity();
    double r_star = 0.0;
    double r = std::numeric_limits<double>::infinity();
    bool ok = false;
};

/// Final contraction logic shared by the dense and block-structured paths:
/// given A*G(x_bar), I - A*DG(x_bar) and A*(DG(ball) - DG(x_bar)) as interval
/// data, derives Y/Z0/Z2, the proven radius r, and checks
/// Z0+Z2 < 1, Y/(1-Z0-Z2) <= r_star and Y + r(Z0+Z2-1) < 0.
ContractionBounds contraction_from_pieces(const IntervalVector& AG,
                                          const IntervalMatrix& I_minus_ADG,
                                          const IntervalMatrix& ADG_diff, double r_star);

/// Dense contraction check for an arbitrary square map (test- and
/// cross-check-friendly; the orbit pipeline uses the block-structured path).
template <class F>
ContractionBounds verify_contraction(F&& G, const std::vector<double>& x_bar, double r_star) {
    const std::size_t n = x_bar.size();
    Eigen::MatrixXd Jf = jacobian_float(G, x_bar);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Jf);
    if (!lu.isInvertible())
        throw SingularJacobian("approximate Jacobian is singular; cannot build preconditioner");
    Eigen::MatrixXd A = lu.inverse();
    IntervalMatrix A_iv = IntervalMatrix::thin(A);

    IntervalVector thin_x = IntervalVector::thin(x_bar);
    std::vector<Interval> gx = G(thin_x.entries());
    IntervalVector AG = A_iv * IntervalVector(std::move(gx));

    IntervalMatrix DG_thin = jacobian_interval(G, thin_x);
    IntervalVector ball(n);
    for (std::size_t i = 0; i < n; ++i) ball[i] = inflate(Interval(x_bar[i]), r_star);
    IntervalMatrix DG_ball = jacobian_interval(G, ball);

    IntervalMatrix I_minus_ADG = IntervalMatrix::identity(n) - A_iv * DG_thin;
    IntervalMatrix ADG_diff = A_iv * (DG_ball - DG_thin);
    return contraction_from_pieces(AG, I_minus_ADG, ADG_diff, r_star);
}

struct ProveOptions {
    std::vector<double> r_star_ladder = {1e-4, 1e-5, 1e-6};
    bool h_variable = false;
    bool allow_recenter = true;
    double newton_tol = 1e-12;
    int newton_max_iters = 50;
};

/// Full proof pipeline for one candidate: refine with Newton, certify
/// contraction (block-structured bounds, r_star ladder, optional re-center),
/// and attach rigorous per-step reward enclosures.
ProofCertificate prove_orbit(const OrbitCandidate& candidate, const ControllerSpec& controller,
                             const ProveOptions& options = {});

struct OrbitRewardBounds {
    std::vector<Interval> per_step;
    Interval max_step;  // [max of lows, max of highs]: enclosure of the best per-step reward
};

/// Rigorous per-step reward enclosures over the proven orbit tube
/// (each state inflated by the proven radius r).
OrbitRewardBounds orbit_reward_bounds(const ProofCertificate& certificate,
                                      const ControllerSpec& controller);

/// Per-step reward enclosure at one state box. Pendulum scores the raw
/// controller output in its action term; cartpole scores the pole elevation.
Interval orbit_step_reward(const MdpConfig& config, const ControllerSpec& controller,
                           const IntervalVector& state_box);

/// Forward float iteration over one period from the certified midpoint;
/// returns the closure defect ||x_m - x_0 - 2*pi*j*e_angular||_inf.
double periodicity_defect(const ProofCertificate& certificate, const ControllerSpec& controller);

/// Re-derives the contraction inequalities from a certificate's stored
/// numbers alone (used after deserialization).
bool recheck_certificate(const ProofCertificate& certificate);

}  // namespace orbitcert
