#include "lgm/proposal.hpp"

#include <cmath>
#include <limits>

#include "lgm/errors.hpp"

namespace lgm {

namespace {
constexpr double LOG_PI = 1.1447298858494001741;
constexpr double LOG_2PI = 1.8378770664093454836;
}  // namespace

Vector sample_proposal(const ProposalParams& p, RngStream& rng) {
  const int d = p.dim();
  Eigen::LLT<Matrix> llt(p.sigma);
  if (llt.info() != Eigen::Success)
    throw Error("sample_proposal: scale matrix is not SPD");
  Vector z(d);
  for (int i = 0; i < d; ++i) z[i] = rng.next_normal();
  Vector draw = p.mu + Matrix(llt.matrixL()) * z;
  if (p.family == ProposalFamily::StudentT) {
    const double u = rng.next_chisq(p.nu) / p.nu;
    draw = p.mu + (draw - p.mu) / std::sqrt(u);
  }
  return draw;
}

double log_proposal_density(const ProposalParams& p, const Vector& z) {
  const int d = p.dim();
  if (z.size() != d)
    throw DimensionError("log_proposal_density: dimension mismatch");
  Eigen::LLT<Matrix> llt(p.sigma);
  if (llt.info() != Eigen::Success)
    throw Error("log_proposal_density: scale matrix is not SPD");
  double half_log_det = 0.0;
  for (int i = 0; i < d; ++i) half_log_det += std::log(llt.matrixL()(i, i));
  const Vector r = z - p.mu;
  const double maha = r.dot(llt.solve(r));
  if (p.family == ProposalFamily::Gaussian)
    return -0.5 * d * LOG_2PI - half_log_det - 0.5 * maha;
  const double nu = p.nu;
  return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) -
         0.5 * d * (std::log(nu) + LOG_PI) - half_log_det -
         0.5 * (nu + d) * std::log1p(maha / nu);
}

ProposalParams adapt_moments(const std::vector<Vector>& z,
                             const std::vector<double>& log_weights,
                             const ProposalParams& current) {
  const size_t n = z.size();
  if (n < 2 || log_weights.size() != n)
    throw SamplerError("adapt_moments: need at least 2 weighted samples");
  const int d = static_cast<int>(z[0].size());

  double max_lw = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) max_lw = std::max(max_lw, lw);
  if (!std::isfinite(max_lw))
    throw SamplerError("adapt_moments: all weights are zero");

  double total = 0.0;
  std::vector<double> w(n);
  for (size_t j = 0; j < n; ++j) {
    w[j] = std::exp(log_weights[j] - max_lw);
    total += w[j];
  }

  Vector mu = Vector::Zero(d);
  for (size_t j = 0; j < n; ++j) mu += (w[j] / total) * z[j];
  Matrix cov = Matrix::Zero(d, d);
  double sum_sq = 0.0;
  for (size_t j = 0; j < n; ++j) {
    const Vector r = z[j] - mu;
    cov.noalias() += (w[j] / total) * r * r.transpose();
    sum_sq += w[j] * w[j];
  }

  // With near-degenerate weights the moment estimates collapse onto the top
  // draw. Stretching along the mean shift keeps the proposal able to travel
  // toward mass the current one barely reaches.
  const double ess_w = total * total / sum_sq;
  if (n >= 20 && ess_w < 10.0 && current.mu.size() == d) {
    const Vector dmu = mu - current.mu;
    cov.noalias() += dmu * dmu.transpose();
    // While the mean is still travelling, the empirical covariance is
    // meaningless (near-rank-1 on the top draw); add an inflated copy of the
    // current scale so every direction keeps being explored. Once the mean
    // has settled, let the spectrum floor govern the shrink instead.
    if (current.sigma.rows() == d &&
        dmu.squaredNorm() > 0.25 * current.sigma.trace() / d)
      cov.noalias() += 2.0 * current.sigma;
  }

  // SPD repair: symmetrize and floor the spectrum. The floor is relative to
  // the current proposal scale, capping the per-round shrink factor: a
  // degenerate weight set (one draw carrying all mass) would otherwise
  // collapse the proposal to a near-delta it can never recover from.
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const double cur_scale = current.sigma.size() > 0
                               ? current.sigma.trace() / current.sigma.rows()
                               : 0.0;
  const double floor =
      std::max({2.5e-3 * cur_scale, 1e-8 * cov.trace() / d, 1e-12});
  Vector ev = eig.eigenvalues().cwiseMax(floor);
  cov = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();

  ProposalParams out = current;
  out.mu = mu;
  out.sigma = cov;
  return out;
}

}  // namespace lgm
