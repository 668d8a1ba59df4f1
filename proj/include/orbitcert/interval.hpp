#pragma once

// Outward-rounded interval arithmetic over binary64.
//
// Every operation returns an interval that contains the exact real-number
// image of its argument sets. Outward rounding is realized by nextafter
// inflation: each endpoint is computed with one ordinary (correctly rounded)
// floating-point operation and then pushed one ulp outward, which dominates
// the half-ulp rounding error. Elementary functions from libm are not
// correctly rounded, so their endpoints are pushed two ulps outward.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace orbitcert {

/// Division where the denominator interval contains zero, or an exact
/// floating-point division by zero. The evaluation point is not provably
/// smooth, so any proof attempt must abort.
struct DivisionByZeroInterval : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Elementary-function argument outside the mathematical domain
/// (e.g. arccos on an interval escaping [-1,1]).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A piecewise-defined function (clip, relu) was evaluated on an interval
/// that straddles a breakpoint: the evaluation is not on a single smooth
/// branch, so derivative information would be wrong. Proofs must abort.
struct NonSmoothCrossing : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline double next_up(double x) {
    return std::nextafter(x, std::numeric_limits<double>::infinity());
}

inline double next_down(double x) {
    return std::nextafter(x, -std::numeric_limits<double>::infinity());
}

inline double next_up2(double x) { return next_up(next_up(x)); }
inline double next_down2(double x) { return next_down(next_down(x)); }

}  // namespace detail

class Interval {
  public:
    Interval() : lo_(0.0), hi_(0.0) {}

    Interval(double point) : lo_(point), hi_(point) { validate(); }  // NOLINT: implicit by design

    Interval(double lo, double hi) : lo_(lo), hi_(hi) {
        if (lo > hi) throw std::invalid_argument("Interval: lo > hi");
        validate();
    }

    double lo() const { return lo_; }
    double hi() const { return hi_; }

    /// Nearest-float approximation of the midpoint (computed overflow-safe).
    double midpoint() const { return lo_ * 0.5 + hi_ * 0.5; }

    /// Upper bound on the distance from midpoint() to either endpoint.
    double radius() const {
        const double m = midpoint();
        const double r = std::max(detail::next_up(m - lo_), detail::next_up(hi_ - m));
        return std::max(r, 0.0);
    }

    /// sup of |x| over the interval; exact.
    double mag() const { return std::max(std::abs(lo_), std::abs(hi_)); }

    /// inf of |x| over the interval; exact.
    double mig() const {
        if (lo_ <= 0.0 && 0.0 <= hi_) return 0.0;
        return std::min(std::abs(lo_), std::abs(hi_));
    }

    double width() const { return detail::next_up(hi_ - lo_); }

    bool is_thin() const { return lo_ == hi_; }

    bool contains(double x) const { return lo_ <= x && x <= hi_; }
    bool contains(const Interval& other) const { return lo_ <= other.lo_ && other.hi_ <= hi_; }
    bool strictly_positive() const { return lo_ > 0.0; }
    bool strictly_negative() const { return hi_ < 0.0; }

    bool operator==(const Interval& o) const { return lo_ == o.lo_ && hi_ == o.hi_; }

  private:
    void validate() const {
        if (!std::isfinite(lo_) || !std::isfinite(hi_))
            throw std::invalid_argument("Interval: endpoints must be finite");
    }

    double lo_, hi_;
};

// ---------------------------------------------------------------------------
// Constants

/// Tight enclosure of pi: the binary64 neighbour below pi and the one above.
inline Interval pi_interval() {
    return Interval(3.141592653589793, detail::next_up(3.141592653589793));
}

inline Interval two_pi_interval() {
    const Interval pi = pi_interval();
    return Interval(detail::next_down(2.0 * pi.lo()), detail::next_up(2.0 * pi.hi()));
}

/// [pi/2]; halving is exact in binary64.
inline Interval half_pi_interval() {
    const Interval pi = pi_interval();
    return Interval(pi.lo() / 2.0, pi.hi() / 2.0);
}

// ---------------------------------------------------------------------------
// Arithmetic

inline Interval operator-(const Interval& x) { return Interval(-x.hi(), -x.lo()); }

inline Interval operator+(const Interval& a, const Interval& b) {
    return Interval(detail::next_down(a.lo() + b.lo()), detail::next_up(a.hi() + b.hi()));
}

inline Interval operator-(const Interval& a, const Interval& b) {
    return Interval(detail::next_down(a.lo() - b.hi()), detail::next_up(a.hi() - b.lo()));
}

inline Interval operator*(const Interval& a, const Interval& b) {
    const double p1 = a.lo() * b.lo();
    const double p2 = a.lo() * b.hi();
    const double p3 = a.hi() * b.lo();
    const double p4 = a.hi() * b.hi();
    return Interval(detail::next_down(std::min({p1, p2, p3, p4})),
                    detail::next_up(std::max({p1, p2, p3, p4})));
}

inline Interval operator/(const Interval& a, const Interval& b) {
    if (b.lo() <= 0.0 && 0.0 <= b.hi())
        throw DivisionByZeroInterval("interval division: denominator contains zero");
    const double q1 = a.lo() / b.lo();
    const double q2 = a.lo() / b.hi();
    const double q3 = a.hi() / b.lo();
    const double q4 = a.hi() / b.hi();
    return Interval(detail::next_down(std::min({q1, q2, q3, q4})),
                    detail::next_up(std::max({q1, q2, q3, q4})));
}

inline Interval operator+(const Interval& a, double b) { return a + Interval(b); }
inline Interval operator+(double a, const Interval& b) { return Interval(a) + b; }
inline Interval operator-(const Interval& a, double b) { return a - Interval(b); }
inline Interval operator-(double a, const Interval& b) { return Interval(a) - b; }
inline Interval operator*(const Interval& a, double b) { return a * Interval(b); }
inline Interval operator*(double a, const Interval& b) { return Interval(a) * b; }
inline Interval operator/(const Interval& a, double b) { return a / Interval(b); }
inline Interval operator/(double a, const Interval& b) { return Interval(a) / b; }

// ---------------------------------------------------------------------------
// Elementary functions

/// Tight square: exploits the dependency between the two factors, so
/// sqr([-1,1]) = [0,1] rather than [-1,1].
inline Interval sqr(const Interval& x) {
    const double a = x.lo() * x.lo();
    const double b = x.hi() * x.hi();
    if (x.contains(0.0)) return Interval(0.0, detail::next_up(std::max(a, b)));
    return Interval(detail::next_down(std::min(a, b)), detail::next_up(std::max(a, b)));
}

inline Interval sqrt(const Interval& x) {
    if (x.lo() < 0.0) throw DomainError("interval sqrt: argument extends below zero");
    return Interval(std::max(0.0, detail::next_down(std::sqrt(x.lo()))),
                    detail::next_up(std::sqrt(x.hi())));
}

inline Interval abs(const Interval& x) {
    if (x.lo() >= 0.0) return x;
    if (x.hi() <= 0.0) return -x;
    return Interval(0.0, x.mag());
}

namespace detail {

/// Conservatively decides whether some point c + 2*pi*k (k integer) lies in
/// [lo, hi]. Uses the interval enclosure of 2*pi, so borderline cases answer
/// "yes", which only ever widens trig results (never unsound).
inline bool contains_critical_point(double lo, double hi, double c) {
    const Interval tp = two_pi_interval();
    const long k_first = static_cast<long>(std::floor((lo - c) / tp.hi())) - 1;
    const long k_last = static_cast<long>(std::floor((hi - c) / tp.lo())) + 1;
    for (long k = k_first; k <= k_last; ++k) {
        const Interval point = Interval(c) + static_cast<double>(k) * tp;
        if (point.lo() <= hi && lo <= point.hi()) return true;
    }
    return false;
}

inline Interval clamp_unit(double lo, double hi) {
    return Interval(std::max(lo, -1.0), std::min(hi, 1.0));
}

}  // namespace detail

inline Interval sin(const Interval& x) {
    const Interval tp = two_pi_interval();
    if (x.width() >= tp.hi()) return Interval(-1.0, 1.0);
    const double slo = std::sin(x.lo());
    const double shi = std::sin(x.hi());
    double lo = detail::next_down2(std::min(slo, shi));
    double hi = detail::next_up2(std::max(slo, shi));
    const Interval hp = half_pi_interval();
    if (detail::contains_critical_point(x.lo(), x.hi(), hp.lo())) hi = 1.0;    // maxima at pi/2 + 2*pi*k
    if (detail::contains_critical_point(x.lo(), x.hi(), -hp.hi())) lo = -1.0;  // minima at -pi/2 + 2*pi*k
    return detail::clamp_unit(lo, hi);
}

inline Interval cos(const Interval& x) {
    const Interval tp = two_pi_interval();
    if (x.width() >= tp.hi()) return Interval(-1.0, 1.0);
    const double clo = std::cos(x.lo());
    const double chi = std::cos(x.hi());
    double lo = detail::next_down2(std::min(clo, chi));
    double hi = detail::next_up2(std::max(clo, chi));
    const Interval pi = pi_interval();
    if (detail::contains_critical_point(x.lo(), x.hi(), 0.0)) hi = 1.0;       // maxima at 2*pi*k
    if (detail::contains_critical_point(x.lo(), x.hi(), pi.lo())) lo = -1.0;  // minima at pi + 2*pi*k
    return detail::clamp_unit(lo, hi);
}

/// Monotone decreasing on [-1,1]; result clamped to [0, sup pi].
inline Interval acos(const Interval& x) {
    if (x.lo() < -1.0 || x.hi() > 1.0)
        throw DomainError("interval acos: argument escapes [-1,1]");
    const double lo = std::max(0.0, detail::next_down2(std::acos(x.hi())));
    const double hi = std::min(pi_interval().hi(), detail::next_up2(std::acos(x.lo())));
    return Interval(lo, hi);
}

inline Interval tanh(const Interval& x) {
    return detail::clamp_unit(detail::next_down2(std::tanh(x.lo())),
                              detail::next_up2(std::tanh(x.hi())));
}

// ---------------------------------------------------------------------------
// Guarded piecewise functions

/// Clip restricted to a single smooth branch. Fully saturated arguments
/// collapse to the thin breakpoint value; arguments inside [lo, hi] pass
/// through; anything straddling a breakpoint raises NonSmoothCrossing so a
/// proof cannot silently differentiate across a kink.
inline Interval clip_guarded(const Interval& x, double lo, double hi) {
    if (x.lo() >= hi) return Interval(hi, hi);
    if (x.hi() <= lo) return Interval(lo, lo);
    if (x.lo() >= lo && x.hi() <= hi) return x;
    throw NonSmoothCrossing("clip_guarded: interval straddles a clip breakpoint");
}

/// relu with the same branch guard semantics as clip_guarded.
inline Interval relu_guarded(const Interval& x) {
    if (x.lo() >= 0.0) return x;
    if (x.hi() <= 0.0) return Interval(0.0, 0.0);
    throw NonSmoothCrossing("relu_guarded: interval straddles zero");
}

// ---------------------------------------------------------------------------
// Set operations

inline Interval hull(const Interval& a, const Interval& b) {
    return Interval(std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi()));
}

/// Returns false (leaving out untouched) when the intervals do not overlap.
inline bool intersect(const Interval& a, const Interval& b, Interval& out) {
    const double lo = std::max(a.lo(), b.lo());
    const double hi = std::min(a.hi(), b.hi());
    if (lo > hi) return false;
    out = Interval(lo, hi);
    return true;
}

/// Symmetric inflation: x widened by delta on both sides.
inline Interval inflate(const Interval& x, double delta) {
    return Interval(detail::next_down(x.lo() - delta), detail::next_up(x.hi() + delta));
}

inline std::string to_string(const Interval& x) {
    return "[" + std::to_string(x.lo()) + ", " + std::to_string(x.hi()) + "]";
}

}  // namespace orbitcert
