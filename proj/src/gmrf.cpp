#include "lgm/gmrf.hpp"

#include <algorithm>
#include <cmath>

#include "lgm/errors.hpp"

namespace lgm {

SparsePrecision::SparsePrecision(int dim, double regularization_jitter)
    : dim_(dim), jitter_(regularization_jitter) {
  if (dim < 1) throw DimensionError("SparsePrecision: dim must be >= 1");
  if (regularization_jitter < 0.0)
    throw Error("SparsePrecision: jitter must be nonnegative");
}

void SparsePrecision::add(int row, int col, double value) {
  if (row < 0 || col < 0 || row >= dim_ || col >= dim_)
    throw DimensionError("SparsePrecision::add: index out of range");
  if (row < col) std::swap(row, col);
  auto key = [](const Entry& a, std::pair<int, int> b) {
    return a.row < b.first || (a.row == b.first && a.col < b.second);
  };
  auto it = std::lower_bound(entries_.begin(), entries_.end(),
                             std::make_pair(row, col), key);
  if (it != entries_.end() && it->row == row && it->col == col) {
    it->value += value;
  } else {
    entries_.insert(it, Entry{row, col, value});
  }
}

int SparsePrecision::bandwidth() const {
  int bw = 0;
  for (const auto& en : entries_) bw = std::max(bw, en.row - en.col);
  return bw;
}

Vector SparsePrecision::multiply(const Vector& x) const {
  if (x.size() != dim_)
    throw DimensionError("SparsePrecision::multiply: dimension mismatch");
  Vector y = Vector::Zero(dim_);
  for (const auto& en : entries_) {
    y[en.row] += en.value * x[en.col];
    if (en.row != en.col) y[en.col] += en.value * x[en.row];
  }
  return y;
}

Matrix SparsePrecision::dense() const {
  Matrix M = Matrix::Zero(dim_, dim_);
  for (const auto& en : entries_) {
    M(en.row, en.col) = en.value;
    M(en.col, en.row) = en.value;
  }
  return M;
}

SparsePrecision build_rw2_precision(int n, double tau) {
  if (n < 3) throw DimensionError("build_rw2_precision: n must be >= 3");
  if (tau <= 0.0) throw Error("build_rw2_precision: tau must be positive");
  // Q = tau * D^T D with D the (n-2) x n second-difference operator.
  SparsePrecision Q(n);
  for (int k = 0; k < n - 2; ++k) {
    const double d[3] = {1.0, -2.0, 1.0};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b <= a; ++b)
        Q.add(k + a, k + b, tau * d[a] * d[b]);
  }
  return Q;
}

CholeskyFactor cholesky(const SparsePrecision& Q) {
  const int n = Q.dim();
  const int bw = Q.bandwidth();
  CholeskyFactor F;
  F.dim_ = n;
  F.bandwidth_ = bw;
  F.band_ = Matrix::Zero(bw + 1, n);
  // Load Q + jitter*I into band storage.
  for (const auto& en : Q.entries()) F.band_(en.row - en.col, en.col) = en.value;
  for (int j = 0; j < n; ++j) F.band_(0, j) += Q.jitter();

  // In-place banded Cholesky, column by column.
  double log_det = 0.0;
  for (int j = 0; j < n; ++j) {
    double diag = F.band_(0, j);
    for (int k = std::max(0, j - bw); k < j; ++k) {
      const double ljk = F.band_(j - k, k);
      diag -= ljk * ljk;
    }
    if (diag <= 0.0)
      throw FactorizationError("cholesky: non-positive pivot at index " +
                                   std::to_string(j),
                               j);
    const double ljj = std::sqrt(diag);
    F.band_(0, j) = ljj;
    log_det += 2.0 * std::log(ljj);
    for (int i = j + 1; i <= std::min(n - 1, j + bw); ++i) {
      double s = F.band_(i - j, j);
      for (int k = std::max(0, i - bw); k < j; ++k)
        s -= F.band_(i - k, k) * F.band_(j - k, k);
      F.band_(i - j, j) = s / ljj;
    }
  }
  F.log_det_ = log_det;
  return F;
}

Vector CholeskyFactor::forward_solve(const Vector& b) const {
  if (b.size() != dim_)
    throw DimensionError("CholeskyFactor::forward_solve: dimension mismatch");
  Vector x = b;
  for (int j = 0; j < dim_; ++j) {
    x[j] /= band_(0, j);
    for (int i = j + 1; i <= std::min(dim_ - 1, j + bandwidth_); ++i)
      x[i] -= band_(i - j, j) * x[j];
  }
  return x;
}

Vector CholeskyFactor::backward_solve(const Vector& b) const {
  if (b.size() != dim_)
    throw DimensionError("CholeskyFactor::backward_solve: dimension mismatch");
  Vector x = b;
  for (int j = dim_ - 1; j >= 0; --j) {
    for (int i = j + 1; i <= std::min(dim_ - 1, j + bandwidth_); ++i)
      x[j] -= band_(i - j, j) * x[i];
    x[j] /= band_(0, j);
  }
  return x;
}

Vector CholeskyFactor::solve(const Vector& b) const {
  return backward_solve(forward_solve(b));
}

double gaussian_logdensity(const SparsePrecision& Q, const Vector& mean,
                           const Vector& x) {
  if (mean.size() != Q.dim() || x.size() != Q.dim())
    throw DimensionError("gaussian_logdensity: dimension mismatch");
  const CholeskyFactor F = cholesky(Q);
  const Vector r = x - mean;
  const double q = Q.quad_form(r) + Q.jitter() * r.squaredNorm();
  constexpr double LOG_2PI = 1.8378770664093454836;
  return -0.5 * Q.dim() * LOG_2PI + 0.5 * F.log_det() - 0.5 * q;
}

Vector solve_constrained(const CholeskyFactor& L, const Vector& b,
                         const LinearConstraint& c) {
  Vector x = L.solve(b);
  if (c.empty()) return x;
  const int m = static_cast<int>(c.A.rows());
  if (m >= L.dim())
    throw ConstraintError("solve_constrained: constraint rank must be < dim");
  Matrix W(L.dim(), m);  // Q^{-1} A^T
  for (int k = 0; k < m; ++k) W.col(k) = L.solve(c.A.row(k).transpose());
  const Matrix S = c.A * W;  // m x m
  Eigen::FullPivLU<Matrix> lu(S);
  if (!lu.isInvertible())
    throw ConstraintError("solve_constrained: constraint matrix is rank-deficient");
  return x - W * lu.solve(c.A * x - c.e);
}

}  // namespace lgm
