#pragma once

// Interval vectors and matrices with the sup-norm machinery used by the
// contraction verifier: the vector max-norm and the induced matrix norm
// (max absolute row sum), both as rigorous upper bounds.

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "orbitcert/interval.hpp"

namespace orbitcert {

class IntervalVector {
  public:
    IntervalVector() = default;
    explicit IntervalVector(std::size_t n) : entries_(n) {}
    explicit IntervalVector(std::vector<Interval> entries) : entries_(std::move(entries)) {}

    /// Thin interval vector from a float vector.
    static IntervalVector thin(const std::vector<double>& v) {
        std::vector<Interval> e;
        e.reserve(v.size());
        for (double x : v) e.emplace_back(x);
        return IntervalVector(std::move(e));
    }

    std::size_t size() const { return entries_.size(); }
    Interval& operator[](std::size_t i) { return entries_[i]; }
    const Interval& operator[](std::size_t i) const { return entries_[i]; }
    const std::vector<Interval>& entries() const { return entries_; }

    std::vector<double> midpoints() const {
        std::vector<double> m(entries_.size());
        for (std::size_t i = 0; i < entries_.size(); ++i) m[i] = entries_[i].midpoint();
        return m;
    }

    double max_radius() const {
        double r = 0.0;
        for (const auto& e : entries_) r = std::max(r, e.radius());
        return r;
    }

  private:
    std::vector<Interval> entries_;
};

/// Rigorous upper bound on the vector sup-norm (exact: endpoint maxima).
inline double norm_inf_upper(const IntervalVector& v) {
    double n = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) n = std::max(n, v[i].mag());
    return n;
}

class IntervalMatrix {
  public:
    IntervalMatrix() : rows_(0), cols_(0) {}
    IntervalMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), entries_(rows * cols) {}

    static IntervalMatrix identity(std::size_t n) {
        IntervalMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = Interval(1.0);
        return m;
    }

    /// Thin interval matrix from a float matrix.
    static IntervalMatrix thin(const Eigen::MatrixXd& a) {
        IntervalMatrix m(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()));
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = Interval(a(i, j));
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    Interval& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
    const Interval& operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

    Eigen::MatrixXd midpoints() const {
        Eigen::MatrixXd m(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).midpoint();
        return m;
    }

  private:
    std::size_t rows_, cols_;
    std::vector<Interval> entries_;
};

inline IntervalMatrix operator+(const IntervalMatrix& a, const IntervalMatrix& b) {
    IntervalMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + b(i, j);
    return out;
}

inline IntervalMatrix operator-(const IntervalMatrix& a, const IntervalMatrix& b) {
    IntervalMatrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) - b(i, j);
    return out;
}

inline IntervalMatrix operator*(const IntervalMatrix& a, const IntervalMatrix& b) {
    IntervalMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            Interval acc(0.0);
            for (std::size_t k = 0; k < a.cols(); ++k) acc = acc + a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

inline IntervalVector operator*(const IntervalMatrix& a, const IntervalVector& v) {
    IntervalVector out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        Interval acc(0.0);
        for (std::size_t k = 0; k < a.cols(); ++k) acc = acc + a(i, k) * v[k];
        out[i] = acc;
    }
    return out;
}

/// Rigorous upper bound on the induced sup-norm: max over rows of the sum of
/// entry magnitudes, with each partial sum rounded upward.
inline double induced_norm_upper(const IntervalMatrix& m) {
    double norm = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) row = detail::next_up(row + m(i, j).mag());
        norm = std::max(norm, row);
    }
    return norm;
}

}  // namespace orbitcert
