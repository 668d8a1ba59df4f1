#pragma once

// Forward-mode automatic differentiation over a generic scalar kind.
//
// A Jet carries a value and a vector of partial derivatives with respect to a
// fixed set of independent variables. The scalar kind S is either double
// (point derivatives) or Interval (rigorous enclosures of derivatives over a
// box). Generic code is written against the free functions below so the same
// expression evaluates at double, Interval, Jet<double> and Jet<Interval>.

#include <Eigen/Dense>
#include <cstddef>
#include <type_traits>
#include <vector>

#include "orbitcert/interval.hpp"
#include "orbitcert/interval_linalg.hpp"

namespace orbitcert {

// ---------------------------------------------------------------------------
// double counterparts of the interval elementary functions, so unqualified
// calls resolve for every scalar kind.

inline double sqr(double x) { return x * x; }
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tanh(double x) { return std::tanh(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double abs(double x) { return std::abs(x); }

inline double acos(double x) {
    if (x < -1.0 || x > 1.0) throw DomainError("acos: argument outside [-1,1]");
    return std::acos(x);
}

/// Float-kind clip: plain saturation (the guard semantics live in the
/// interval and jet overloads).
inline double clip_guarded(double x, double lo, double hi) {
    return std::min(std::max(x, lo), hi);
}

inline double relu_guarded(double x) { return std::max(x, 0.0); }

/// Builds a constant of scalar kind S. Jets need an exemplar to know the
/// number of independent variables, hence the "like" argument.
inline double scalar_like(const double&, double c) { return c; }
inline Interval scalar_like(const Interval&, double c) { return Interval(c); }

// ---------------------------------------------------------------------------

template <class S>
struct Jet {
    S v;
    std::vector<S> d;

    Jet() : v(S(0.0)) {}
    Jet(S value, std::size_t n_vars) : v(value), d(n_vars, S(0.0)) {}
    Jet(S value, std::vector<S> partials) : v(std::move(value)), d(std::move(partials)) {}

    /// The idx-th independent variable out of n_vars.
    static Jet variable(S value, std::size_t n_vars, std::size_t idx) {
        Jet j(std::move(value), n_vars);
        j.d[idx] = S(1.0);
        return j;
    }
};

template <class S>
Jet<S> scalar_like(const Jet<S>& like, double c) {
    return Jet<S>(scalar_like(like.v, c), like.d.size());
}

// ---------------------------------------------------------------------------
// Arithmetic

template <class S>
Jet<S> operator-(const Jet<S>& a) {
    Jet<S> out(-a.v, a.d.size());
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = -a.d[i];
    return out;
}

template <class S>
Jet<S> operator+(const Jet<S>& a, const Jet<S>& b) {
    Jet<S> out(a.v + b.v, a.d.size());
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = a.d[i] + b.d[i];
    return out;
}

template <class S>
Jet<S> operator-(const Jet<S>& a, const Jet<S>& b) {
    Jet<S> out(a.v - b.v, a.d.size());
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = a.d[i] - b.d[i];
    return out;
}

template <class S>
Jet<S> operator*(const Jet<S>& a, const Jet<S>& b) {
    Jet<S> out(a.v * b.v, a.d.size());
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return out;
}

template <class S>
Jet<S> operator/(const Jet<S>& a, const Jet<S>& b) {
    if constexpr (std::is_same_v<S, double>) {
        if (b.v == 0.0) throw DivisionByZeroInterval("division by zero in float evaluation");
    }
    Jet<S> out(a.v / b.v, a.d.size());
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = (a.d[i] - out.v * b.d[i]) / b.v;
    return out;
}

template <class S>
Jet<S> operator+(const Jet<S>& a, double c) {
    Jet<S> out = a;
    out.v = a.v + c;
    return out;
}
template <class S>
Jet<S> operator+(double c, const Jet<S>& a) {
    return a + c;
}
template <class S>
Jet<S> operator-(const Jet<S>& a, double c) {
    return a + (-c);
}
template <class S>
Jet<S> operator-(double c, const Jet<S>& a) {
    return -(a + (-c));
}
template <class S>
Jet<S> operator*(const Jet<S>& a, double c) {
    Jet<S> out(a.v * c, a.d.size());
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = a.d[i] * c;
    return out;
}
template <class S>
Jet<S> operator*(double c, const Jet<S>& a) {
    return a * c;
}
template <class S>
Jet<S> operator/(const Jet<S>& a, double c) {
    if (c == 0.0) throw DivisionByZeroInterval("division by zero in float evaluation");
    Jet<S> out(a.v / c, a.d.size());
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = a.d[i] / c;
    return out;
}
template <class S>
Jet<S> operator/(double c, const Jet<S>& a) {
    Jet<S> num(scalar_like(a.v, c), a.d.size());
    return num / a;
}

// ---------------------------------------------------------------------------
// Elementary functions (chain rule)

template <class S>
Jet<S> sin(const Jet<S>& a) {
    Jet<S> out(sin(a.v), a.d.size());
    const S w = cos(a.v);
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = w * a.d[i];
    return out;
}

template <class S>
Jet<S> cos(const Jet<S>& a) {
    Jet<S> out(cos(a.v), a.d.size());
    const S w = -sin(a.v);
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = w * a.d[i];
    return out;
}

template <class S>
Jet<S> sqr(const Jet<S>& a) {
    Jet<S> out(sqr(a.v), a.d.size());
    const S w = a.v + a.v;
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = w * a.d[i];
    return out;
}

template <class S>
Jet<S> sqrt(const Jet<S>& a) {
    Jet<S> out(sqrt(a.v), a.d.size());
    const S denom = out.v + out.v;
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = a.d[i] / denom;
    return out;
}

template <class S>
Jet<S> acos(const Jet<S>& a) {
    Jet<S> out(acos(a.v), a.d.size());
    const S w = sqrt(scalar_like(a.v, 1.0) - sqr(a.v));
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = -(a.d[i] / w);
    return out;
}

template <class S>
Jet<S> tanh(const Jet<S>& a) {
    Jet<S> out(tanh(a.v), a.d.size());
    const S w = scalar_like(a.v, 1.0) - sqr(out.v);
    for (std::size_t i = 0; i < a.d.size(); ++i) out.d[i] = w * a.d[i];
    return out;
}

/// Differentiable clip on a single smooth branch. On a saturated branch the
/// value collapses to the breakpoint and all partials vanish; the interval
/// kind refuses to straddle a breakpoint (NonSmoothCrossing).
template <class S>
Jet<S> clip_guarded(const Jet<S>& a, double lo, double hi) {
    if constexpr (std::is_same_v<S, double>) {
        if (a.v >= hi) return Jet<S>(hi, a.d.size());
        if (a.v <= lo) return Jet<S>(lo, a.d.size());
        return a;
    } else {
        if (a.v.lo() >= hi) return Jet<S>(S(hi), a.d.size());
        if (a.v.hi() <= lo) return Jet<S>(S(lo), a.d.size());
        if (a.v.lo() >= lo && a.v.hi() <= hi) return a;
        throw NonSmoothCrossing("clip_guarded: interval straddles a clip breakpoint");
    }
}

template <class S>
Jet<S> relu_guarded(const Jet<S>& a) {
    if constexpr (std::is_same_v<S, double>) {
        if (a.v <= 0.0) return Jet<S>(0.0, a.d.size());
        return a;
    } else {
        if (a.v.hi() <= 0.0) return Jet<S>(S(0.0), a.d.size());
        if (a.v.lo() >= 0.0) return a;
        throw NonSmoothCrossing("relu_guarded: interval straddles zero");
    }
}

// ---------------------------------------------------------------------------
// Jacobians

/// Jacobian of f at a point, computed by seeding one Jet<double> variable per
/// input. f maps std::vector<Jet<double>> to std::vector<Jet<double>>.
template <class F>
Eigen::MatrixXd jacobian_float(F&& f, const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<Jet<double>> seeded;
    seeded.reserve(n);
    for (std::size_t i = 0; i < n; ++i) seeded.push_back(Jet<double>::variable(x[i], n, i));
    const std::vector<Jet<double>> y = f(seeded);
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < y.size(); ++r)
        for (std::size_t c = 0; c < n; ++c)
            jac(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = y[r].d[c];
    return jac;
}

/// Rigorous enclosure of the Jacobian over a box: every entry encloses the
/// corresponding partial derivative at every point of the box.
template <class F>
IntervalMatrix jacobian_interval(F&& f, const IntervalVector& x) {
    const std::size_t n = x.size();
    std::vector<Jet<Interval>> seeded;
    seeded.reserve(n);
    for (std::size_t i = 0; i < n; ++i) seeded.push_back(Jet<Interval>::variable(x[i], n, i));
    const std::vector<Jet<Interval>> y = f(seeded);
    IntervalMatrix jac(y.size(), n);
    for (std::size_t r = 0; r < y.size(); ++r)
        for (std::size_t c = 0; c < n; ++c) jac(r, c) = y[r].d[c];
    return jac;
}

}  // namespace orbitcert
