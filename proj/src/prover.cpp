#include "orbitcert/prover.hpp"

#include <algorithm>
#include <utility>

namespace orbitcert {

std::vector<double> ProofCertificate::state(int k) const {
    const int p = state_dim();
    const int off = x_offset();
    return std::vector<double>(x_bar.begin() + off + k * p, x_bar.begin() + off + (k + 1) * p);
}

OrbitMap build_G1(const MdpConfig& config, const ControllerSpec& controller, int m, int j) {
    return OrbitMap(config, controller, m, j, false, 0.0);
}

OrbitMap build_G2(const MdpConfig& config, const ControllerSpec& controller, int m, int j,
                  double anchor) {
    return OrbitMap(config, controller, m, j, true, anchor);
}

double residual_norm(const std::vector<double>& g) {
    double n = 0.0;
    for (double v : g) n = std::max(n, std::abs(v));
    return n;
}

ContractionBounds contraction_from_pieces(const IntervalVector& AG,
                                          const IntervalMatrix& I_minus_ADG,
                                          const IntervalMatrix& ADG_diff, double r_star) {
    ContractionBounds b;
    b.r_star = r_star;
    b.Y = norm_inf_upper(AG);
    b.Z0 = induced_norm_upper(I_minus_ADG);
    b.Z2 = induced_norm_upper(ADG_diff);

    Interval Y_iv(0.0, b.Y);
    Interval Z_iv = Interval(0.0, b.Z0) + Interval(0.0, b.Z2);
    if (!(Z_iv.hi() < 1.0)) return b;
    Interval denom = Interval(1.0) - Z_iv;  // strictly positive by the check above
    Interval quotient = Y_iv / denom;
    double r = detail::next_up(quotient.hi());
    if (!(r <= r_star)) return b;
    // The certified inequality, evaluated outward: Y + r*(Z0+Z2-1) < 0.
    Interval residual = Y_iv + Interval(r) * (Z_iv - Interval(1.0));
    if (!(residual.hi() < 0.0)) return b;
    b.r = r;
    b.ok = true;
    return b;
}

namespace {

struct StepDerivsF {
    Eigen::MatrixXd dx;  // p x p
    Eigen::VectorXd dh;  // p (empty when h is fixed)
};

StepDerivsF step_derivs_float(const MdpConfig& cfg, const ControllerSpec& ctrl, double h,
                              const double* x, int p, bool with_h) {
    const std::size_t nv = static_cast<std::size_t>(p + (with_h ? 1 : 0));
    std::vector<Jet<double>> xs;
    xs.reserve(static_cast<std::size_t>(p));
    for (int c = 0; c < p; ++c)
        xs.push_back(Jet<double>::variable(x[c], nv, static_cast<std::size_t>(with_h ? 1 + c : c)));
    Jet<double> hj = with_h ? Jet<double>::variable(h, nv, 0) : Jet<double>(h, nv);
    auto fn = ctrl.as_fn();
    std::vector<Jet<double>> g = step_with_h(cfg, hj, xs, fn);

    StepDerivsF out;
    out.dx.resize(p, p);
    if (with_h) out.dh.resize(p);
    for (int r = 0; r < p; ++r) {
        for (int c = 0; c < p; ++c)
            out.dx(r, c) = g[static_cast<std::size_t>(r)].d[static_cast<std::size_t>(with_h ? 1 + c : c)];
        if (with_h) out.dh(r) = g[static_cast<std::size_t>(r)].d[0];
    }
    return out;
}

struct StepDerivsIv {
    IntervalMatrix dx;          // p x p
    std::vector<Interval> dh;   // p (empty when h is fixed)
};

StepDerivsIv step_derivs_interval(const MdpConfig& cfg, const ControllerSpec& ctrl,
                                  const Interval& h, const Interval* x, int p, bool with_h) {
    const std::size_t nv = static_cast<std::size_t>(p + (with_h ? 1 : 0));
    std::vector<Jet<Interval>> xs;
    xs.reserve(static_cast<std::size_t>(p));
    for (int c = 0; c < p; ++c)
        xs.push_back(Jet<Interval>::variable(x[c], nv, static_cast<std::size_t>(with_h ? 1 + c : c)));
    Jet<Interval> hj = with_h ? Jet<Interval>::variable(h, nv, 0) : Jet<Interval>(h, nv);
    auto fn = ctrl.as_fn();
    std::vector<Jet<Interval>> g = step_with_h(cfg, hj, xs, fn);

    StepDerivsIv out;
    out.dx = IntervalMatrix(static_cast<std::size_t>(p), static_cast<std::size_t>(p));
    if (with_h) out.dh.assign(static_cast<std::size_t>(p), Interval(0.0));
    for (int r = 0; r < p; ++r) {
        for (int c = 0; c < p; ++c)
            out.dx(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                g[static_cast<std::size_t>(r)].d[static_cast<std::size_t>(with_h ? 1 + c : c)];
        if (with_h) out.dh[static_cast<std::size_t>(r)] = g[static_cast<std::size_t>(r)].d[0];
    }
    return out;
}

// M += A[:, r0:r0+pr] * B, placed in columns c0:c0+pc.
void accumulate_block(IntervalMatrix& M, const IntervalMatrix& A_iv, std::size_t r0,
                      std::size_t c0, const IntervalMatrix& B) {
    const std::size_t n = A_iv.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < B.rows(); ++k) {
            const Interval& aik = A_iv(i, r0 + k);
            for (std::size_t c = 0; c < B.cols(); ++c)
                M(i, c0 + c) = M(i, c0 + c) + aik * B(k, c);
        }
}

// M[:, col] += A[:, r0:r0+len] * colvals.
void accumulate_col(IntervalMatrix& M, const IntervalMatrix& A_iv, std::size_t r0,
                    std::size_t col, const std::vector<Interval>& colvals) {
    const std::size_t n = A_iv.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < colvals.size(); ++k)
            M(i, col) = M(i, col) + A_iv(i, r0 + k) * colvals[k];
}

Eigen::MatrixXd orbit_jacobian_float(const OrbitMap& map, const std::vector<double>& X) {
    const MdpConfig& cfg = map.config();
    const int p = cfg.state_dim();
    const int m = map.period();
    const bool variable = map.h_variable();
    const int off = variable ? 1 : 0;
    const int n = map.dim();

    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    if (variable) {
        J(0, 1 + cfg.angular_index()) = 1.0;
        for (int i = 0; i < m * p; ++i) J(1 + i, 1 + i) = 1.0;
    } else {
        J.setIdentity();
    }
    const double h = variable ? X[0] : cfg.h;
    for (int i = 0; i < m; ++i) {
        StepDerivsF d = step_derivs_float(cfg, map.controller(), h, X.data() + off + i * p, p, variable);
        const int t = (i + 1) % m;  // row block receiving -Dg(x_i)
        J.block(off + t * p, off + i * p, p, p) -= d.dx;
        if (variable) J.block(off + t * p, 0, p, 1) -= d.dh;
    }
    return J;
}

ContractionBounds orbit_contraction(const OrbitMap& map, const std::vector<double>& x_bar,
                                    double r_star) {
    const MdpConfig& cfg = map.config();
    const ControllerSpec& ctrl = map.controller();
    const int p = cfg.state_dim();
    const int m = map.period();
    const bool variable = map.h_variable();
    const std::size_t off = variable ? 1 : 0;
    const std::size_t n = static_cast<std::size_t>(map.dim());
    const int a = cfg.angular_index();

    Eigen::MatrixXd J = orbit_jacobian_float(map, x_bar);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible())
        throw SingularJacobian("float orbit Jacobian is singular; cannot build preconditioner");
    Eigen::MatrixXd A = lu.inverse();
    IntervalMatrix A_iv = IntervalMatrix::thin(A);

    // Y: interval evaluation of the map at the thin point.
    std::vector<Interval> X_thin;
    X_thin.reserve(n);
    for (double v : x_bar) X_thin.emplace_back(v);
    IntervalVector AG = A_iv * IntervalVector(map(X_thin));

    // Per-step derivative blocks at the thin point and over the r_star ball.
    Interval h_thin = variable ? Interval(x_bar[0]) : Interval(cfg.h);
    Interval h_ball = variable ? inflate(h_thin, r_star) : h_thin;
    std::vector<StepDerivsIv> thin_blocks, ball_blocks;
    thin_blocks.reserve(static_cast<std::size_t>(m));
    ball_blocks.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        std::vector<Interval> box_thin(static_cast<std::size_t>(p)), box_ball(static_cast<std::size_t>(p));
        for (int c = 0; c < p; ++c) {
            double v = x_bar[off + static_cast<std::size_t>(i * p + c)];
            box_thin[static_cast<std::size_t>(c)] = Interval(v);
            box_ball[static_cast<std::size_t>(c)] = inflate(Interval(v), r_star);
        }
        thin_blocks.push_back(step_derivs_interval(cfg, ctrl, h_thin, box_thin.data(), p, variable));
        ball_blocks.push_back(step_derivs_interval(cfg, ctrl, h_ball, box_ball.data(), p, variable));
    }

    // Z0 input: I - A*DG(x_bar). Build M = A*DG(x_bar) from the fixed sparsity
    // pattern plus the -Dg blocks, then subtract from the identity.
    IntervalMatrix M(n, n);
    if (!variable) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < n; ++c) M(i, c) = A_iv(i, c);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 1; c < n; ++c) M(i, c) = A_iv(i, c);
            std::size_t phase_col = 1 + static_cast<std::size_t>(a);
            M(i, phase_col) = M(i, phase_col) + A_iv(i, 0);
        }
    }
    for (int i = 0; i < m; ++i) {
        const int t = (i + 1) % m;
        const std::size_t r0 = off + static_cast<std::size_t>(t * p);
        const std::size_t c0 = off + static_cast<std::size_t>(i * p);
        IntervalMatrix minus_dx(static_cast<std::size_t>(p), static_cast<std::size_t>(p));
        for (int r = 0; r < p; ++r)
            for (int c = 0; c < p; ++c)
                minus_dx(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                    -thin_blocks[static_cast<std::size_t>(i)].dx(static_cast<std::size_t>(r),
                                                                 static_cast<std::size_t>(c));
        accumulate_block(M, A_iv, r0, c0, minus_dx);
        if (variable) {
            std::vector<Interval> minus_dh(static_cast<std::size_t>(p));
            for (int r = 0; r < p; ++r)
                minus_dh[static_cast<std::size_t>(r)] =
                    -thin_blocks[static_cast<std::size_t>(i)].dh[static_cast<std::size_t>(r)];
            accumulate_col(M, A_iv, r0, 0, minus_dh);
        }
    }
    IntervalMatrix I_minus_ADG(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < n; ++c)
            I_minus_ADG(i, c) = (i == c ? Interval(1.0) : Interval(0.0)) - M(i, c);

    // Z2 input: A*(DG(ball) - DG(x_bar)); the fixed pattern cancels exactly.
    IntervalMatrix M2(n, n);
    for (int i = 0; i < m; ++i) {
        const int t = (i + 1) % m;
        const std::size_t r0 = off + static_cast<std::size_t>(t * p);
        const std::size_t c0 = off + static_cast<std::size_t>(i * p);
        IntervalMatrix diff(static_cast<std::size_t>(p), static_cast<std::size_t>(p));
        for (int r = 0; r < p; ++r)
            for (int c = 0; c < p; ++c)
                diff(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                    thin_blocks[static_cast<std::size_t>(i)].dx(static_cast<std::size_t>(r),
                                                                static_cast<std::size_t>(c)) -
                    ball_blocks[static_cast<std::size_t>(i)].dx(static_cast<std::size_t>(r),
                                                                static_cast<std::size_t>(c));
        accumulate_block(M2, A_iv, r0, c0, diff);
        if (variable) {
            std::vector<Interval> diffh(static_cast<std::size_t>(p));
            for (int r = 0; r < p; ++r)
                diffh[static_cast<std::size_t>(r)] =
                    thin_blocks[static_cast<std::size_t>(i)].dh[static_cast<std::size_t>(r)] -
                    ball_blocks[static_cast<std::size_t>(i)].dh[static_cast<std::size_t>(r)];
            accumulate_col(M2, A_iv, r0, 0, diffh);
        }
    }
    return contraction_from_pieces(AG, I_minus_ADG, M2, r_star);
}

std::vector<double> recenter_step(const OrbitMap& map, const std::vector<double>& x_bar) {
    Eigen::MatrixXd J = orbit_jacobian_float(map, x_bar);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible()) return x_bar;
    std::vector<double> g = map(x_bar);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = g[i];
    Eigen::VectorXd delta = lu.solve(rhs);
    std::vector<double> trial = x_bar;
    for (std::size_t i = 0; i < trial.size(); ++i) trial[i] -= delta(static_cast<Eigen::Index>(i));
    if (residual_norm(map(trial)) < residual_norm(g)) return trial;
    return x_bar;
}

}  // namespace

ProofCertificate prove_orbit(const OrbitCandidate& candidate, const ControllerSpec& controller,
                             const ProveOptions& options) {
    const MdpConfig& cfg = candidate.config;
    const int a = cfg.angular_index();
    if (static_cast<int>(candidate.states.size()) != candidate.m)
        throw std::invalid_argument("candidate must carry exactly m states");
    double anchor = options.h_variable ? candidate.states[0][static_cast<std::size_t>(a)] : 0.0;
    OrbitMap map(cfg, controller, candidate.m, candidate.j, options.h_variable, anchor);

    std::vector<double> x0;
    x0.reserve(static_cast<std::size_t>(map.dim()));
    if (options.h_variable) x0.push_back(cfg.h);
    for (const auto& s : candidate.states) x0.insert(x0.end(), s.begin(), s.end());

    NewtonResult refined = newton_refine(map, x0, options.newton_tol, options.newton_max_iters);
    std::vector<double> x_bar = refined.x;

    ContractionBounds last_bounds;
    bool have_bounds = false;
    std::string last_guard;
    const int recenter_rounds = options.allow_recenter ? 2 : 1;
    for (int round = 0; round < recenter_rounds; ++round) {
        if (round > 0) x_bar = recenter_step(map, x_bar);
        for (double r_star : options.r_star_ladder) {
            ContractionBounds bounds;
            try {
                bounds = orbit_contraction(map, x_bar, r_star);
            } catch (const NonSmoothCrossing& e) {
                last_guard = e.what();
                continue;
            } catch (const DomainError& e) {
                last_guard = e.what();
                continue;
            } catch (const DivisionByZeroInterval& e) {
                last_guard = e.what();
                continue;
            }
            have_bounds = true;
            last_bounds = bounds;
            if (!bounds.ok) continue;

            ProofCertificate cert;
            cert.config = cfg;
            cert.controller_name = !controller.name.empty() ? controller.name : candidate.controller_name;
            cert.m = candidate.m;
            cert.j = candidate.j;
            cert.h_variable = options.h_variable;
            cert.exact_h = !options.h_variable;
            cert.Y = bounds.Y;
            cert.Z0 = bounds.Z0;
            cert.Z2 = bounds.Z2;
            cert.r_star = bounds.r_star;
            cert.r = bounds.r;
            cert.x_bar = x_bar;
            cert.h_enclosure = options.h_variable ? inflate(Interval(x_bar[0]), bounds.r)
                                                  : Interval(cfg.h);
            cert.contraction_ok = true;
            OrbitRewardBounds rewards = orbit_reward_bounds(cert, controller);
            cert.step_rewards = std::move(rewards.per_step);
            cert.max_step_reward = rewards.max_step;
            return cert;
        }
    }
    if (have_bounds)
        throw ContractionFailed("contraction bounds do not certify the orbit: Y=" +
                                    std::to_string(last_bounds.Y) + " Z0=" + std::to_string(last_bounds.Z0) +
                                    " Z2=" + std::to_string(last_bounds.Z2) +
                                    " r_star=" + std::to_string(last_bounds.r_star),
                                last_bounds.Y, last_bounds.Z0, last_bounds.Z2, last_bounds.r_star);
    throw SmoothnessUnverifiable("interval evaluation hit a guard on every attempt: " + last_guard);
}

Interval orbit_step_reward(const MdpConfig& config, const ControllerSpec& controller,
                           const IntervalVector& state_box) {
    std::vector<Interval> state = state_box.entries();
    if (config.system == SystemKind::Pendulum) {
        std::vector<Interval> obs = compute_observation<Interval>(config.system, state);
        Interval u_raw = controller.eval(obs);
        Interval wrapped = acos(cos(state[0]));
        return -(sqr(wrapped) + 0.1 * sqr(state[1]) + 0.001 * sqr(u_raw));
    }
    return cos(state[2]);
}

OrbitRewardBounds orbit_reward_bounds(const ProofCertificate& certificate,
                                      const ControllerSpec& controller) {
    const int p = certificate.state_dim();
    const int off = certificate.x_offset();
    OrbitRewardBounds out;
    double max_lo = -std::numeric_limits<double>::infinity();
    double max_hi = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < certificate.m; ++k) {
        IntervalVector box(static_cast<std::size_t>(p));
        for (int c = 0; c < p; ++c)
            box[static_cast<std::size_t>(c)] =
                inflate(Interval(certificate.x_bar[static_cast<std::size_t>(off + k * p + c)]),
                        certificate.r);
        Interval reward = orbit_step_reward(certificate.config, controller, box);
        out.per_step.push_back(reward);
        max_lo = std::max(max_lo, reward.lo());
        max_hi = std::max(max_hi, reward.hi());
    }
    out.max_step = Interval(max_lo, max_hi);
    return out;
}

double periodicity_defect(const ProofCertificate& certificate, const ControllerSpec& controller) {
    const MdpConfig& cfg = certificate.config;
    const int a = cfg.angular_index();
    double h = certificate.h_variable ? certificate.x_bar[0] : cfg.h;
    auto fn = controller.as_fn();
    std::vector<double> x = certificate.state(0);
    for (int k = 0; k < certificate.m; ++k) x = step_with_h(cfg, h, x, fn);
    std::vector<double> start = certificate.state(0);
    double defect = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
        double expected = start[c] + (static_cast<int>(c) == a ? 2.0 * M_PI * certificate.j : 0.0);
        defect = std::max(defect, std::abs(x[c] - expected));
    }
    return defect;
}

bool recheck_certificate(const ProofCertificate& certificate) {
    if (!certificate.contraction_ok) return false;
    if (!(certificate.r > 0.0) || !(certificate.r <= certificate.r_star)) return false;
    Interval Y(0.0, certificate.Y);
    Interval Z = Interval(0.0, certificate.Z0) + Interval(0.0, certificate.Z2);
    if (!(Z.hi() < 1.0)) return false;
    Interval quotient = Y / (Interval(1.0) - Z);
    if (!(quotient.hi() <= certificate.r)) return false;
    Interval residual = Y + Interval(certificate.r) * (Z - Interval(1.0));
    return residual.hi() < 0.0;
}

}  // namespace orbitcert
