// Interval arithmetic: containment under outward rounding, elementary
// function enclosures, branch guards, set operations, and the sup norms used
// by the contraction verifier.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "orbitcert/interval.hpp"
#include "orbitcert/interval_linalg.hpp"
#include "orbitcert/rng.hpp"

using namespace orbitcert;

namespace {

constexpr double kUlpSlack = 1e-14;  // generous cover for a few ulps at O(1)

Interval random_interval(Rng& rng, double span) {
    const double a = rng.uniform(-span, span);
    const double b = rng.uniform(-span, span);
    return Interval(std::min(a, b), std::max(a, b));
}

double random_member(Rng& rng, const Interval& x) {
    return rng.uniform(x.lo(), x.hi());
}

}  // namespace

TEST_CASE("construction rejects inverted and non-finite endpoints") {
    CHECK_THROWS_AS(Interval(2.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(Interval(std::numeric_limits<double>::quiet_NaN()), std::invalid_argument);
    CHECK_THROWS_AS(Interval(0.0, std::numeric_limits<double>::infinity()), std::invalid_argument);
    CHECK(Interval(1.0).is_thin());
}

TEST_CASE("addition encloses the exact sum with at most one ulp of slack") {
    const Interval z = Interval(1, 2) + Interval(3, 4);
    CHECK(z.contains(Interval(4.0, 6.0)));
    CHECK(z.lo() >= 4.0 - kUlpSlack);
    CHECK(z.hi() <= 6.0 + kUlpSlack);
}

TEST_CASE("symmetric product stays within the unit interval up to rounding") {
    const Interval z = Interval(-1, 1) * Interval(-1, 1);
    CHECK(z.contains(Interval(-1.0, 1.0)));
    CHECK(z.lo() >= -1.0 - kUlpSlack);
    CHECK(z.hi() <= 1.0 + kUlpSlack);
}

TEST_CASE("division by an interval containing zero raises") {
    CHECK_THROWS_AS(Interval(1, 2) / Interval(-1, 1), DivisionByZeroInterval);
    CHECK_THROWS_AS(Interval(1, 2) / Interval(0.0), DivisionByZeroInterval);
    // Denominator bounded away from zero divides fine.
    const Interval q = Interval(1, 2) / Interval(2, 4);
    CHECK(q.contains(0.5));
    CHECK(q.contains(1.0));
}

TEST_CASE("sine over the first quarter period reaches its maximum exactly") {
    const Interval x(0.0, detail::next_up(M_PI / 2.0));
    const Interval s = sin(x);
    CHECK(s.contains(Interval(0.0, 1.0)));
    CHECK(s.hi() == 1.0);  // clamped at the true range maximum
    CHECK(s.lo() >= -1e-15);
}

TEST_CASE("cosine of a thin zero is a thin enclosure of one") {
    const Interval c = cos(Interval(0.0));
    CHECK(c.contains(1.0));
    CHECK(c.hi() == 1.0);
    CHECK(c.radius() <= 1e-15);
}

TEST_CASE("trig and square enclosures contain sampled member images") {
    Rng rng(2024);
    int checked = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const Interval x = random_interval(rng, 10.0);
        const Interval sx = sin(x);
        const Interval cx = cos(x);
        const Interval qx = sqr(x);
        const Interval ax = abs(x);
        for (int k = 0; k < 1000; ++k) {
            const double p = random_member(rng, x);
            CHECK(sx.contains(std::sin(p)));
            CHECK(cx.contains(std::cos(p)));
            CHECK(qx.contains(p * p));
            CHECK(ax.contains(std::abs(p)));
            ++checked;
        }
    }
    CHECK(checked == 100000);
}

TEST_CASE("arithmetic enclosures contain sampled member images") {
    Rng rng(77);
    for (int rep = 0; rep < 2000; ++rep) {
        const Interval x = random_interval(rng, 5.0);
        const Interval y = random_interval(rng, 5.0);
        const double p = random_member(rng, x);
        const double q = random_member(rng, y);
        CHECK((x + y).contains(p + q));
        CHECK((x - y).contains(p - q));
        CHECK((x * y).contains(p * q));
        if (!y.contains(0.0)) CHECK((x / y).contains(p / q));
    }
}

TEST_CASE("unary enclosures are inclusion monotone") {
    Rng rng(5);
    for (int rep = 0; rep < 500; ++rep) {
        const Interval outer = random_interval(rng, 8.0);
        const double m = random_member(rng, outer);
        const Interval inner(std::min(m, outer.midpoint()), std::max(m, outer.midpoint()));
        CHECK(sin(outer).contains(sin(inner)));
        CHECK(cos(outer).contains(cos(inner)));
        CHECK(sqr(outer).contains(sqr(inner)));
        CHECK(abs(outer).contains(abs(inner)));
    }
}

TEST_CASE("thin arithmetic stays within a few ulps of the float result") {
    Rng rng(99);
    for (int rep = 0; rep < 500; ++rep) {
        const double a = rng.uniform(-100.0, 100.0);
        const double b = rng.uniform(-100.0, 100.0);
        const Interval ia(a), ib(b);
        const double scale = std::max(1.0, std::abs(a) + std::abs(b));
        CHECK((ia + ib).radius() <= 4 * std::numeric_limits<double>::epsilon() * scale);
        CHECK((ia * ib).radius() <= 4 * std::numeric_limits<double>::epsilon() * scale * scale);
        CHECK((ia + ib).contains(a + b));
        CHECK((ia - ib).contains(a - b));
        CHECK((ia * ib).contains(a * b));
    }
}

TEST_CASE("acos is defined exactly on the unit interval") {
    const Interval r = acos(Interval(-1.0, 1.0));
    CHECK(r.contains(0.0));
    CHECK(r.contains(M_PI));
    CHECK(r.lo() >= 0.0);
    CHECK_THROWS_AS(acos(Interval(0.5, 1.5)), DomainError);
    // Near the endpoints the widened enclosure still contains the true value.
    const Interval near_one = acos(Interval(1.0 - 1e-12, 1.0));
    CHECK(near_one.contains(std::acos(1.0 - 1e-12)));
    CHECK(near_one.lo() >= 0.0);
}

TEST_CASE("clip collapses saturated branches and rejects straddles") {
    const Interval sat = clip_guarded(Interval(8.0, 8.3), -8.0, 8.0);
    CHECK(sat.is_thin());
    CHECK(sat.lo() == 8.0);

    const Interval low = clip_guarded(Interval(-9.5, -8.0), -8.0, 8.0);
    CHECK(low.is_thin());
    CHECK(low.lo() == -8.0);

    const Interval inside = clip_guarded(Interval(-1.0, 1.0), -2.0, 2.0);
    CHECK(inside == Interval(-1.0, 1.0));

    CHECK_THROWS_AS(clip_guarded(Interval(7.9, 8.1), -8.0, 8.0), NonSmoothCrossing);
    CHECK_THROWS_AS(clip_guarded(Interval(-8.1, -7.9), -8.0, 8.0), NonSmoothCrossing);
}

TEST_CASE("clip results never cross a breakpoint interior") {
    Rng rng(31);
    for (int rep = 0; rep < 2000; ++rep) {
        const Interval x = random_interval(rng, 12.0);
        try {
            const Interval y = clip_guarded(x, -8.0, 8.0);
            const bool below = y.hi() <= -8.0;
            const bool above = y.lo() >= 8.0;
            const bool inside = y.lo() >= -8.0 && y.hi() <= 8.0;
            CHECK((below || above || inside));
        } catch (const NonSmoothCrossing&) {
            // A refused evaluation is the correct outcome for a straddle.
            CHECK(((x.lo() < 8.0 && x.hi() > 8.0) || (x.lo() < -8.0 && x.hi() > -8.0)));
        }
    }
}

TEST_CASE("relu guard mirrors the clip guard at zero") {
    CHECK(relu_guarded(Interval(1.0, 2.0)) == Interval(1.0, 2.0));
    CHECK(relu_guarded(Interval(-2.0, -1.0)).is_thin());
    CHECK_THROWS_AS(relu_guarded(Interval(-0.5, 0.5)), NonSmoothCrossing);
}

TEST_CASE("midpoint radius hull intersect behave on simple inputs") {
    CHECK(Interval(1, 3).midpoint() == 2.0);
    CHECK(Interval(1, 3).radius() >= 1.0);
    CHECK(Interval(1, 3).radius() <= 1.0 + kUlpSlack);
    CHECK(hull(Interval(0, 1), Interval(2, 3)) == Interval(0, 3));

    Interval out;
    CHECK(intersect(Interval(0, 2), Interval(1, 3), out));
    CHECK(out == Interval(1, 2));
    CHECK_FALSE(intersect(Interval(0, 1), Interval(2, 3), out));

    CHECK(Interval(-2, -1).mag() == 2.0);
    CHECK(Interval(-2, -1).mig() == 1.0);
    CHECK(Interval(-1, 2).mig() == 0.0);

    const Interval inflated = inflate(Interval(0.0), 0.5);
    CHECK(inflated.contains(Interval(-0.5, 0.5)));
}

TEST_CASE("pi enclosures bracket the mathematical constants") {
    CHECK(pi_interval().contains(M_PI));
    CHECK(pi_interval().width() <= 1e-15);
    CHECK(two_pi_interval().contains(2.0 * M_PI));
    CHECK(half_pi_interval().contains(M_PI / 2.0));
}

TEST_CASE("vector sup norm is the worst entry magnitude") {
    IntervalVector v(std::vector<Interval>{Interval(-2, -1), Interval(0, 3)});
    CHECK(norm_inf_upper(v) == 3.0);
    CHECK(v.max_radius() >= 1.5);
}

TEST_CASE("induced matrix norm is the max absolute row sum, rounded up") {
    const IntervalMatrix eye = IntervalMatrix::identity(2);
    const double n_eye = induced_norm_upper(eye);
    CHECK(n_eye >= 1.0);
    CHECK(n_eye <= 1.0 + kUlpSlack);

    Eigen::MatrixXd a(2, 2);
    a << 1, -2, 3, 4;
    const double n_a = induced_norm_upper(IntervalMatrix::thin(a));
    CHECK(n_a >= 7.0);
    CHECK(n_a <= 7.0 + kUlpSlack);
}

TEST_CASE("interval matrix products enclose the exact product") {
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << -1, 0.5, 2, -3;
    const IntervalMatrix p = IntervalMatrix::thin(a) * IntervalMatrix::thin(b);
    const Eigen::MatrixXd exact = a * b;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(p(static_cast<std::size_t>(i), static_cast<std::size_t>(j)).contains(exact(i, j)));

    IntervalVector v(std::vector<Interval>{Interval(1.0), Interval(-1.0)});
    const IntervalVector av = IntervalMatrix::thin(a) * v;
    CHECK(av[0].contains(-1.0));
    CHECK(av[1].contains(-1.0));
}
