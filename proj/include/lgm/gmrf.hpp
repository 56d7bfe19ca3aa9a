#pragma once

#include <Eigen/Dense>
#include <vector>

namespace lgm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Symmetric sparse precision matrix; only the lower triangle is stored.
// Entries are coalesced and kept sorted by (row, col).
class SparsePrecision {
 public:
  struct Entry {
    int row;
    int col;
    double value;
  };

  explicit SparsePrecision(int dim, double regularization_jitter = 0.0);

  // Accumulates into the (row, col) slot; (row, col) with row < col is
  // mirrored into the lower triangle.
  void add(int row, int col, double value);

  int dim() const { return dim_; }
  double jitter() const { return jitter_; }
  void set_jitter(double j) { jitter_ = j; }
  const std::vector<Entry>& entries() const { return entries_; }

  int bandwidth() const;
  Vector multiply(const Vector& x) const;  // full symmetric mat-vec
  double quad_form(const Vector& x) const { return x.dot(multiply(x)); }
  Matrix dense() const;  // symmetric reconstruction, no jitter

 private:
  int dim_;
  double jitter_;
  std::vector<Entry> entries_;  // sorted, coalesced, lower triangle
};

// Banded Cholesky factor of Q + jitter*I.
class CholeskyFactor {
 public:
  int dim() const { return dim_; }
  double log_det() const { return log_det_; }

  Vector solve(const Vector& b) const;          // (L L^T)^{-1} b
  Vector forward_solve(const Vector& b) const;  // L^{-1} b
  Vector backward_solve(const Vector& b) const; // L^{-T} b

 private:
  friend CholeskyFactor cholesky(const SparsePrecision& Q);
  int dim_ = 0;
  int bandwidth_ = 0;
  Matrix band_;  // band_(k, j) = L(j + k, j), k = 0..bandwidth
  double log_det_ = 0.0;
};

// Hard linear constraints A x = e (all-zero e for sum-to-zero).
struct LinearConstraint {
  Matrix A;  // rows = number of constraints, cols = dim; empty = none
  Vector e;

  bool empty() const { return A.rows() == 0; }
};

// tau * R with R the second-difference structure matrix; rank n - 2.
SparsePrecision build_rw2_precision(int n, double tau);

CholeskyFactor cholesky(const SparsePrecision& Q);

double gaussian_logdensity(const SparsePrecision& Q, const Vector& mean,
                           const Vector& x);

// Solves Q x = b, then projects onto {x : A x = e} by conditioning on the
// constraint (kriging correction). Empty constraint reduces to a plain solve.
Vector solve_constrained(const CholeskyFactor& L, const Vector& b,
                         const LinearConstraint& c);

}  // namespace lgm
