#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gnnpf/matrix.hpp"

namespace gnnpf {

struct PcaResult {
  Matrix coords;                           // n x 2
  std::vector<double> components[2];       // unit loading vectors (zero if absent)
  double explained_variance[2] = {0.0, 0.0};
};

namespace detail {

// Dominant eigenpair of a symmetric PSD matrix by power iteration.
inline std::pair<std::vector<double>, double> power_iteration(const Matrix& c, double tol, std::size_t max_iters) {
  const std::size_t d = c.rows();
  // Start from the diagonal so the seed is never orthogonal to the top
  // direction for PSD input, with a small ramp to break exact symmetry.
  std::vector<double> v(d), next(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = c(i, i) + 1e-3 * static_cast<double>(i + 1);
  double norm = std::sqrt(dot(v, v));
  for (double& x : v) x /= norm;
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    for (std::size_t i = 0; i < d; ++i) next[i] = dot(c.row(i), v);
    norm = std::sqrt(dot(next, next));
    if (norm == 0.0) return {std::vector<double>(d, 0.0), 0.0};
    for (double& x : next) x /= norm;
    double change = 0.0;
    for (std::size_t i = 0; i < d; ++i) change = std::max(change, std::abs(next[i] - v[i]));
    v.swap(next);
    lambda = norm;
    if (change < tol) break;
  }
  // Rayleigh quotient for the final estimate.
  for (std::size_t i = 0; i < d; ++i) next[i] = dot(c.row(i), v);
  lambda = dot(v, next);
  return {v, lambda};
}

}  // namespace detail

// Top-two principal components of the rows of `data` via power iteration
// with deflation on the covariance. Each loading vector is sign-fixed so its
// largest-magnitude entry is positive. Zero-variance directions yield zero
// components and zero coordinates.
inline PcaResult pca_2d(const Matrix& data, double tol = 1e-10, std::size_t max_iters = 1000) {
  const std::size_t n = data.rows(), d = data.cols();
  if (n < 2) throw std::invalid_argument("pca_2d: need at least two rows");
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += data(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = data(i, j) - mean[j];
  Matrix cov = matmul_tn(centered, centered);
  cov *= 1.0 / static_cast<double>(n - 1);

  double trace = 0.0;
  for (std::size_t j = 0; j < d; ++j) trace += cov(j, j);
  const double zero_tol = 1e-12 * std::max(1.0, trace);

  PcaResult out;
  out.coords = Matrix(n, 2);
  for (int k = 0; k < 2; ++k) {
    auto [vec, lambda] = detail::power_iteration(cov, tol, max_iters);
    if (lambda <= zero_tol) {
      out.components[k] = std::vector<double>(d, 0.0);
      out.explained_variance[k] = 0.0;
      continue;
    }
    // Re-orthogonalize against PC1 to remove drift left by deflation.
    if (k == 1) {
      const double overlap = dot(vec, out.components[0]);
      for (std::size_t j = 0; j < d; ++j) vec[j] -= overlap * out.components[0][j];
      const double norm = std::sqrt(dot(vec, vec));
      for (double& x : vec) x /= norm;
    }
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(vec[j]) > std::abs(vec[arg])) arg = j;
    if (vec[arg] < 0.0)
      for (double& x : vec) x = -x;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov(i, j) -= lambda * vec[i] * vec[j];
    for (std::size_t i = 0; i < n; ++i) out.coords(i, k) = dot(centered.row(i), vec);
    out.components[k] = std::move(vec);
    out.explained_variance[k] = lambda;
  }
  return out;
}

}  // namespace gnnpf
