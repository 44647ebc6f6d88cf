#pragma once

// Dense row-major matrices and the handful of numeric primitives the
// pipeline needs: masked softmax, dominant singular vector, PCA and a
// central-difference gradient oracle. Everything is double precision.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "valse/error.hpp"

namespace valse {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      fail(ErrorCode::kShapeMismatch, "matrix data length does not match rows*cols");
    }
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) fail(ErrorCode::kShapeMismatch, "ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
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

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }

  bool operator==(const Matrix& o) const = default;

  void require_same_shape(const Matrix& o) const {
    if (!same_shape(o)) {
      fail(ErrorCode::kShapeMismatch, shape_string() + " vs " + o.shape_string());
    }
  }
  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(const Matrix& m) {
  return std::all_of(m.data().begin(), m.data().end(), [](double v) { return std::isfinite(v); });
}

/// a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::kShapeMismatch, "matmul " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* br = b.row(k).data();
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * br[j];
    }
  }
  return out;
}

/// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::kShapeMismatch, "matmul_tn " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* ar = a.row(k).data();
    const double* br = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ar[i];
      if (aki == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aki * br[j];
    }
  }
  return out;
}

/// a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    fail(ErrorCode::kShapeMismatch, "matmul_nt " + a.shape_string() + " * " + b.shape_string());
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.row(j).data();
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ar[k] * br[k];
      out(i, j) = s;
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  a.require_same_shape(b);
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline double frobenius_norm(const Matrix& m) { return norm2(m.data()); }

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  a.require_same_shape(b);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

/// Row-wise softmax. Entries where `mask` is false are excluded from the
/// normalization and come out exactly zero.
inline Matrix softmax_rows(const Matrix& m, const std::vector<bool>* mask = nullptr) {
  if (mask != nullptr && mask->size() != m.size()) {
    fail(ErrorCode::kShapeMismatch, "softmax mask has wrong size");
  }
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto in = m.row(i);
    auto o = out.row(i);
    const auto allowed = [&](std::size_t j) {
      return mask == nullptr || (*mask)[i * m.cols() + j];
    };
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (allowed(j)) mx = std::max(mx, in[j]);
    if (mx == -std::numeric_limits<double>::infinity()) {
      fail(ErrorCode::kFullyMaskedRow, "row " + std::to_string(i) + " has no unmasked entry");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      o[j] = allowed(j) ? std::exp(in[j] - mx) : 0.0;
      sum += o[j];
    }
    for (std::size_t j = 0; j < m.cols(); ++j) o[j] /= sum;
  }
  return out;
}

/// Convenience overload taking the mask as a boolean-valued matrix
/// (nonzero = unmasked).
inline Matrix softmax_rows(const Matrix& m, const Matrix& mask) {
  m.require_same_shape(mask);
  std::vector<bool> flags(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) flags[i] = mask.data()[i] != 0.0;
  return softmax_rows(m, &flags);
}

struct SvdResult {
  double top_singular_value = 0.0;
  std::vector<double> top_right_vector;
  /// sigma_2 / sigma_1 estimated by one deflation sweep.
  double gap_ratio = 0.0;
};

namespace detail {

// y = e^T (e v)
inline std::vector<double> gram_apply(const Matrix& e, std::span<const double> v) {
  std::vector<double> ev(e.rows(), 0.0);
  for (std::size_t i = 0; i < e.rows(); ++i) ev[i] = dot(e.row(i), v);
  std::vector<double> out(e.cols(), 0.0);
  for (std::size_t i = 0; i < e.rows(); ++i) {
    const auto r = e.row(i);
    for (std::size_t j = 0; j < e.cols(); ++j) out[j] += ev[i] * r[j];
  }
  return out;
}

inline bool normalize(std::vector<double>& v) {
  const double n = norm2(v);
  if (n == 0.0 || !std::isfinite(n)) return false;
  for (double& x : v) x /= n;
  return true;
}

}  // namespace detail

/// Dominant right singular vector of `e` by power iteration on e^T e.
/// Convergence is declared once ||e^T e v - s^2 v|| <= tol * s^2. A second,
/// deflated sweep estimates sigma_2/sigma_1; spectra whose top two singular
/// values are within `tol` of each other are rejected.
inline SvdResult top_right_singular_vector(const Matrix& e, std::size_t max_iters = 10000,
                                           double tol = 1e-10) {
  if (e.rows() == 0 || e.cols() == 0) fail(ErrorCode::kZeroMatrix, "empty matrix");
  const bool nonzero = std::any_of(e.data().begin(), e.data().end(),
                                   [](double x) { return std::abs(x) >= 1e-12; });
  if (!nonzero) fail(ErrorCode::kZeroMatrix, "all entries below 1e-12");

  const std::size_t d = e.cols();
  // Start from the largest row plus a small deterministic tilt so the start
  // is never exactly orthogonal to the dominant direction.
  std::size_t best = 0;
  for (std::size_t i = 1; i < e.rows(); ++i)
    if (norm2(e.row(i)) > norm2(e.row(best))) best = i;
  std::vector<double> v(e.row(best).begin(), e.row(best).end());
  detail::normalize(v);
  for (std::size_t j = 0; j < d; ++j) v[j] += 1e-3 * static_cast<double>(j + 1) / static_cast<double>(d);
  detail::normalize(v);

  double lambda = 0.0;
  bool converged = false;
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::vector<double> w = detail::gram_apply(e, v);
    lambda = dot(w, v);
    double resid = 0.0;
    for (std::size_t j = 0; j < d; ++j) resid += (w[j] - lambda * v[j]) * (w[j] - lambda * v[j]);
    resid = std::sqrt(resid);
    if (lambda > 0.0 && resid <= tol * lambda) {
      converged = true;
      break;
    }
    if (!detail::normalize(w)) break;
    v = std::move(w);
  }
  lambda = std::max(lambda, 0.0);

  // Deflated sweep for the runner-up.
  auto deflated = [&](std::span<const double> x) {
    std::vector<double> y = detail::gram_apply(e, x);
    const double proj = dot(v, x);
    for (std::size_t j = 0; j < d; ++j) y[j] -= lambda * proj * v[j];
    return y;
  };
  std::vector<double> u(d);
  for (std::size_t j = 0; j < d; ++j) u[j] = std::cos(1.0 + 0.37 * static_cast<double>(j));
  {
    const double proj = dot(u, v);
    for (std::size_t j = 0; j < d; ++j) u[j] -= proj * v[j];
  }
  double lambda2 = 0.0;
  if (detail::normalize(u)) {
    const std::size_t sweeps = std::min<std::size_t>(max_iters, 500);
    for (std::size_t it = 0; it < sweeps; ++it) {
      std::vector<double> w = deflated(u);
      lambda2 = dot(w, u);
      const double proj = dot(w, v);
      for (std::size_t j = 0; j < d; ++j) w[j] -= proj * v[j];
      if (!detail::normalize(w)) {
        lambda2 = 0.0;
        break;
      }
      u = std::move(w);
    }
  }
  lambda2 = std::clamp(lambda2, 0.0, lambda);

  SvdResult out;
  out.top_singular_value = std::sqrt(lambda);
  out.top_right_vector = std::move(v);
  out.gap_ratio = lambda > 0.0 ? std::sqrt(lambda2 / lambda) : 1.0;
  if (out.gap_ratio > 1.0 - tol) {
    fail(ErrorCode::kNoConvergence, "leading singular values are degenerate");
  }
  if (!converged) {
    fail(ErrorCode::kNoConvergence, "power iteration did not reach tolerance");
  }
  return out;
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns.
inline std::pair<std::vector<double>, Matrix> symmetric_eigen(Matrix a, double tol = 1e-15,
                                                              std::size_t max_sweeps = 100) {
  const std::size_t n = a.rows();
  if (a.cols() != n) fail(ErrorCode::kShapeMismatch, "symmetric_eigen needs a square matrix");
  Matrix vecs = Matrix::identity(n);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= tol * tol * std::max(total, 1e-300)) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vecs(k, p);
          const double vkq = vecs(k, q);
          vecs(k, p) = c * vkp - s * vkq;
          vecs(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  std::vector<double> values(n);
  Matrix sorted(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) sorted(r, c) = vecs(r, order[c]);
  }
  return {values, sorted};
}

struct PcaResult {
  Matrix coordinates;                  // rows x k
  Matrix components;                   // cols x k, unit columns
  std::vector<double> explained_variance;
  double total_variance = 0.0;
};

/// Mean-centres the rows of `points` and projects them onto the top-k
/// principal axes. Component signs are fixed so the largest-magnitude
/// loading of each axis is positive.
inline PcaResult pca(const Matrix& points, std::size_t k) {
  if (k > points.cols()) fail(ErrorCode::kInvalidArgument, "k exceeds dimensionality");
  if (points.rows() < 2) fail(ErrorCode::kInvalidArgument, "pca needs at least two points");
  Matrix centred = points;
  for (std::size_t j = 0; j < points.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) mean += points(i, j);
    mean /= static_cast<double>(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) centred(i, j) -= mean;
  }
  if (frobenius_norm(centred) == 0.0) fail(ErrorCode::kRankDeficient, "all points identical");

  Matrix cov = matmul_tn(centred, centred);
  cov *= 1.0 / static_cast<double>(points.rows() - 1);
  auto [values, vecs] = symmetric_eigen(cov);

  PcaResult out;
  out.components = Matrix(points.cols(), k);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t arg = 0;
    for (std::size_t r = 1; r < points.cols(); ++r)
      if (std::abs(vecs(r, c)) > std::abs(vecs(arg, c))) arg = r;
    const double sign = vecs(arg, c) < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < points.cols(); ++r) out.components(r, c) = sign * vecs(r, c);
    out.explained_variance.push_back(std::max(values[c], 0.0));
  }
  for (double v : values) out.total_variance += std::max(v, 0.0);
  out.coordinates = matmul(centred, out.components);
  return out;
}

inline Matrix pca_project(const Matrix& points, std::size_t k) { return pca(points, k).coordinates; }

/// Central differences: entry i = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
inline Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x,
                               double eps) {
  if (!(eps > 0.0)) fail(ErrorCode::kInvalidArgument, "eps must be positive");
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + eps;
    const double up = f(probe);
    probe.data()[i] = orig - eps;
    const double down = f(probe);
    probe.data()[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      fail(ErrorCode::kNonFiniteEvaluation, "f is not finite near entry " + std::to_string(i));
    }
    grad.data()[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace valse
