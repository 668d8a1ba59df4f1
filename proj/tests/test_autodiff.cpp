// Forward-mode derivatives: float Jacobians against finite differences, the
// interval Jacobian as a superset of pointwise Jacobians, and guard behavior
// of the piecewise-linear primitives under differentiation.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "orbitcert/controllers.hpp"
#include "orbitcert/dynamics.hpp"
#include "orbitcert/interval.hpp"
#include "orbitcert/jet.hpp"
#include "orbitcert/rng.hpp"

using namespace orbitcert;

namespace {

// One discretized step of the closed-loop system as a generic map, usable with
// doubles, intervals, or jets.
template <typename S>
std::vector<S> closed_loop_step(const MdpConfig& config, const ControllerSpec& spec,
                                const std::vector<S>& state) {
    return step(config, state, spec.as_fn());
}

// Controller that always outputs zero, over any scalar kind.
const auto zero_ctrl = [](const auto& obs) { return scalar_like(obs[0], 0.0); };

Eigen::MatrixXd fd_jacobian(const std::function<std::vector<double>(const std::vector<double>&)>& f,
                            const std::vector<double>& x, double eps) {
    const auto fx = f(x);
    Eigen::MatrixXd j(static_cast<Eigen::Index>(fx.size()), static_cast<Eigen::Index>(x.size()));
    for (std::size_t c = 0; c < x.size(); ++c) {
        auto hi = x, lo = x;
        hi[c] += eps;
        lo[c] -= eps;
        const auto fhi = f(hi);
        const auto flo = f(lo);
        for (std::size_t r = 0; r < fx.size(); ++r)
            j(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                (fhi[r] - flo[r]) / (2.0 * eps);
    }
    return j;
}

}  // namespace

TEST_CASE("derivative of sine at zero is one") {
    const auto f = [](const std::vector<Jet<double>>& x) {
        return std::vector<Jet<double>>{sin(x[0])};
    };
    const Eigen::MatrixXd j = jacobian_float(f, std::vector<double>{0.0});
    CHECK(j.rows() == 1);
    CHECK(j.cols() == 1);
    CHECK(j(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("pendulum step Jacobian matches central differences") {
    const MdpConfig config = MdpConfig::pendulum_default(Scheme::Explicit, 0.05);
    const std::vector<double> x0{0.3, 1.0};
    const auto f_jet = [&](const std::vector<Jet<double>>& x) { return step(config, x, zero_ctrl); };
    const auto f_pt = [&](const std::vector<double>& x) { return step(config, x, zero_ctrl); };
    const Eigen::MatrixXd ad = jacobian_float(f_jet, x0);
    const Eigen::MatrixXd fd = fd_jacobian(f_pt, x0, 1e-6);
    CHECK((ad - fd).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("closed loop Jacobians match finite differences across systems and schemes") {
    const ControllerSpec pend = parse_formula("0.3*x1 + 0.1*x2", "lin_pend");
    const ControllerSpec cart = parse_formula("0.2*x3 + 0.1*x4", "lin_cart");
    Rng rng(4242);
    for (const Scheme scheme : {Scheme::Explicit, Scheme::SemiImplicit}) {
        const MdpConfig pc = MdpConfig::pendulum_default(scheme, 0.05);
        const MdpConfig cc = MdpConfig::cartpole_default(scheme, 0.01);
        for (int rep = 0; rep < 100; ++rep) {
            {
                const std::vector<double> x{rng.uniform(-M_PI, M_PI), rng.uniform(-4.0, 4.0)};
                const auto f_jet = [&](const std::vector<Jet<double>>& s) {
                    return closed_loop_step(pc, pend, s);
                };
                const auto f_pt = [&](const std::vector<double>& s) {
                    return closed_loop_step(pc, pend, s);
                };
                const Eigen::MatrixXd ad = jacobian_float(f_jet, x);
                const Eigen::MatrixXd fd = fd_jacobian(f_pt, x, 1e-6);
                CHECK((ad - fd).cwiseAbs().maxCoeff() <= 1e-5);
            }
            {
                const std::vector<double> x{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                                            rng.uniform(-M_PI, M_PI), rng.uniform(-1.0, 1.0)};
                const auto f_jet = [&](const std::vector<Jet<double>>& s) {
                    return closed_loop_step(cc, cart, s);
                };
                const auto f_pt = [&](const std::vector<double>& s) {
                    return closed_loop_step(cc, cart, s);
                };
                const Eigen::MatrixXd ad = jacobian_float(f_jet, x);
                const Eigen::MatrixXd fd = fd_jacobian(f_pt, x, 1e-6);
                CHECK((ad - fd).cwiseAbs().maxCoeff() <= 1e-5);
            }
        }
    }
}

TEST_CASE("interval Jacobian over a box contains Jacobians at sampled points") {
    const MdpConfig config = MdpConfig::pendulum_default(Scheme::SemiImplicit, 0.05);
    const ControllerSpec spec = parse_formula("0.3*x1 + 0.1*x2", "lin");
    const auto f_jet = [&](const std::vector<Jet<double>>& s) {
        return closed_loop_step(config, spec, s);
    };
    const auto f_ji = [&](const std::vector<Jet<Interval>>& s) {
        return closed_loop_step(config, spec, s);
    };
    const IntervalVector box(std::vector<Interval>{Interval(0.2, 0.4), Interval(0.9, 1.1)});
    const IntervalMatrix boxed = jacobian_interval(f_ji, box);

    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const std::vector<double> x{rng.uniform(0.2, 0.4), rng.uniform(0.9, 1.1)};
        const Eigen::MatrixXd at_point = jacobian_float(f_jet, x);
        for (std::size_t r = 0; r < boxed.rows(); ++r)
            for (std::size_t c = 0; c < boxed.cols(); ++c)
                CHECK(boxed(r, c).contains(
                    at_point(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))));
    }
}

TEST_CASE("derivatives of a linear map are exact") {
    const auto f = [](const std::vector<Jet<double>>& x) {
        return std::vector<Jet<double>>{2.0 * x[0] - 3.0 * x[1], x[0] + x[1]};
    };
    const Eigen::MatrixXd j = jacobian_float(f, std::vector<double>{1.3, -0.7});
    CHECK(j(0, 0) == 2.0);
    CHECK(j(0, 1) == -3.0);
    CHECK(j(1, 0) == 1.0);
    CHECK(j(1, 1) == 1.0);
}

TEST_CASE("jet division by zero raises") {
    const Jet<double> a = Jet<double>::variable(1.0, 1, 0);
    CHECK_THROWS_AS(a / 0.0, DivisionByZeroInterval);
    const Jet<double> zero = Jet<double>::variable(0.0, 1, 0);
    CHECK_THROWS_AS(a / zero, DivisionByZeroInterval);
}

TEST_CASE("clip saturation zeroes jet partials") {
    const Jet<double> w = Jet<double>::variable(9.0, 1, 0);
    const Jet<double> clipped = clip_guarded(w, -8.0, 8.0);
    CHECK(clipped.v == 8.0);
    CHECK(clipped.d[0] == 0.0);

    const Jet<double> inside = clip_guarded(Jet<double>::variable(3.0, 1, 0), -8.0, 8.0);
    CHECK(inside.v == 3.0);
    CHECK(inside.d[0] == 1.0);
}

TEST_CASE("interval jet clip refuses a straddling value") {
    Jet<Interval> w = Jet<Interval>::variable(Interval(7.9, 8.1), 1, 0);
    CHECK_THROWS_AS(clip_guarded(w, -8.0, 8.0), NonSmoothCrossing);

    // Provable saturation on an interval jet also kills the derivative.
    Jet<Interval> sat = Jet<Interval>::variable(Interval(8.2, 8.4), 1, 0);
    const Jet<Interval> out = clip_guarded(sat, -8.0, 8.0);
    CHECK(out.v.is_thin());
    CHECK(out.v.lo() == 8.0);
    CHECK(out.d[0].mag() == 0.0);
}

TEST_CASE("relu jet matches its subgradient away from zero") {
    const Jet<double> pos = relu_guarded(Jet<double>::variable(2.0, 1, 0));
    CHECK(pos.v == 2.0);
    CHECK(pos.d[0] == 1.0);
    const Jet<double> neg = relu_guarded(Jet<double>::variable(-2.0, 1, 0));
    CHECK(neg.v == 0.0);
    CHECK(neg.d[0] == 0.0);
    Jet<Interval> cross = Jet<Interval>::variable(Interval(-0.1, 0.1), 1, 0);
    CHECK_THROWS_AS(relu_guarded(cross), NonSmoothCrossing);
}

TEST_CASE("jet chain rule composes elementary functions correctly") {
    // d/dx tanh(sin(x)^2) at x = 0.7, against a central difference.
    const auto g = [](double x) { return std::tanh(std::sin(x) * std::sin(x)); };
    const Jet<double> x = Jet<double>::variable(0.7, 1, 0);
    const Jet<double> y = tanh(sqr(sin(x)));
    const double eps = 1e-6;
    const double fd = (g(0.7 + eps) - g(0.7 - eps)) / (2 * eps);
    CHECK(y.v == doctest::Approx(g(0.7)).epsilon(1e-12));
    CHECK(y.d[0] == doctest::Approx(fd).epsilon(1e-8));
}
