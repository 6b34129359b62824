#pragma once

// Dense matrices and the probability primitives shared by the network code.
// Everything is 64-bit and single threaded; reductions run in a fixed order
// so identical inputs always give bitwise-identical results.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "c2c/error.hpp"

namespace c2c {

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0)
      throw ShapeError("matrix dimensions must be positive, got " + dims_string(rows, cols));
  }

  static Matrix from_rows(const std::vector<Vector>& rows) {
    if (rows.empty() || rows.front().empty()) throw ShapeError("from_rows: empty input");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_) throw ShapeError("from_rows: ragged rows");
      std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

  std::string dims() const { return dims_string(rows_, cols_); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  static std::string dims_string(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

inline bool all_finite(std::span<const double> xs) noexcept {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: cannot multiply " + a.dims() + " by " + b.dims());
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  if (!all_finite(out.data())) throw NumericError("matmul: result overflowed");
  return out;
}

// Low-level kernels used by the recurrent layers. Callers guarantee shapes.
namespace kernels {

/// out += M * x
inline void gemv_acc(const Matrix& m, std::span<const double> x, std::span<double> out) noexcept {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r).data();
    const std::size_t n = m.cols();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t c = 0;
    for (; c + 4 <= n; c += 4) {
      s0 += row[c] * x[c];
      s1 += row[c + 1] * x[c + 1];
      s2 += row[c + 2] * x[c + 2];
      s3 += row[c + 3] * x[c + 3];
    }
    for (; c < n; ++c) s0 += row[c] * x[c];
    out[r] += (s0 + s1) + (s2 + s3);
  }
}

/// out += M^T * y
inline void gemv_t_acc(const Matrix& m, std::span<const double> y, std::span<double> out) noexcept {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    const double* row = m.row(r).data();
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += yr * row[c];
  }
}

/// M += scale * y x^T
inline void outer_acc(Matrix& m, std::span<const double> y, std::span<const double> x,
                      double scale = 1.0) noexcept {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double yr = scale * y[r];
    if (yr == 0.0) continue;
    double* row = m.row(r).data();
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += yr * x[c];
  }
}

}  // namespace kernels

inline constexpr double kCrossEntropyCap = 1e4;

/// Numerically stable softmax: exp(z - max z) / sum.
inline Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw ContractViolation("softmax: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  Vector p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

/// log(sum exp(z)), evaluated around the maximum.
inline double log_sum_exp(std::span<const double> logits) {
  if (logits.empty()) throw ContractViolation("log_sum_exp: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  return mx + std::log(z);
}

/// -log p[target], capped at kCrossEntropyCap when the probability is zero.
inline double cross_entropy(std::span<const double> p, std::size_t target) {
  if (target >= p.size())
    throw ContractViolation("cross_entropy: target " + std::to_string(target) +
                            " out of range for " + std::to_string(p.size()) + " classes");
  if (p[target] <= 0.0) return kCrossEntropyCap;
  return std::min(-std::log(p[target]), kCrossEntropyCap);
}

/// Fused cross_entropy(softmax(logits), target) via log-sum-exp.
inline double cross_entropy_logits(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size())
    throw ContractViolation("cross_entropy_logits: target out of range");
  return std::min(log_sum_exp(logits) - logits[target], kCrossEntropyCap);
}

/// Gradient of the fused loss w.r.t. the logits: softmax(logits) - onehot(target).
inline Vector cross_entropy_logits_grad(std::span<const double> logits, std::size_t target) {
  Vector g = softmax(logits);
  g.at(target) -= 1.0;
  return g;
}

inline std::size_t argmax(std::span<const double> xs) {
  if (xs.empty()) throw ContractViolation("argmax: empty input");
  return static_cast<std::size_t>(std::max_element(xs.begin(), xs.end()) - xs.begin());
}

/// Maximum relative discrepancy between an analytic gradient and central
/// differences of f around theta:
///   max_i |a_i - n_i| / max(1, |a_i| + |n_i|).
/// theta is perturbed in place and restored before returning.
inline double grad_check(const std::function<double(std::span<const double>)>& f, Vector theta,
                         std::span<const double> analytic, double h = 1e-5) {
  if (analytic.size() != theta.size())
    throw ShapeError("grad_check: analytic gradient has " + std::to_string(analytic.size()) +
                     " entries, theta has " + std::to_string(theta.size()));
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + h;
    const double fp = f(theta);
    theta[i] = orig - h;
    const double fm = f(theta);
    theta[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("grad_check: non-finite objective at coordinate " + std::to_string(i));
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max(1.0, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace c2c
