#include "lgm/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lgm/errors.hpp"

namespace lgm {

namespace {
constexpr double LOG_2PI = 1.8378770664093454836;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double normal_pdf(double x) {
  return std::exp(-0.5 * x * x - 0.5 * LOG_2PI);
}
}  // namespace

MixedMarginal mix_marginals(const std::vector<WeightedSample>& samples,
                            const Vector& normalized_weights,
                            const std::string& param) {
  if (samples.empty()) throw Error("mix_marginals: empty sample set");
  if (normalized_weights.size() != static_cast<int>(samples.size()))
    throw DimensionError("mix_marginals: weight/sample count mismatch");

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (size_t j = 0; j < samples.size(); ++j) {
    if (normalized_weights[j] == 0.0) continue;
    const auto it = samples[j].fit.marginals.find(param);
    if (it == samples[j].fit.marginals.end())
      throw Error("mix_marginals: sample (" + std::to_string(samples[j].round) +
                  ", " + std::to_string(samples[j].index) +
                  ") carries no marginal for '" + param + "'");
    lo = std::min(lo, it->second.abscissae[0]);
    hi = std::max(hi,
                  it->second.abscissae[it->second.abscissae.size() - 1]);
  }
  if (!(lo < hi)) throw Error("mix_marginals: degenerate abscissa range");

  const int n_grid = 200;
  MixedMarginal out;
  out.name = param;
  out.abscissae = Vector::LinSpaced(n_grid, lo, hi);
  out.densities = Vector::Zero(n_grid);
  for (size_t j = 0; j < samples.size(); ++j) {
    const double w = normalized_weights[j];
    if (w == 0.0) continue;
    const MarginalGrid& mg = samples[j].fit.marginals.at(param);
    for (int i = 0; i < n_grid; ++i)
      out.densities[i] += w * mg.density_at(out.abscissae[i]);
  }
  // Renormalize away the interpolation error.
  double integral = 0.0;
  for (int i = 1; i < n_grid; ++i)
    integral += 0.5 * (out.densities[i] + out.densities[i - 1]) *
                (out.abscissae[i] - out.abscissae[i - 1]);
  if (integral <= 0.0) throw Error("mix_marginals: zero total mass");
  out.densities /= integral;
  return out;
}

double silverman_bandwidth(const Vector& z, const Vector& w) {
  const double n_eff = 1.0 / w.squaredNorm();
  double mu = 0.0;
  for (int i = 0; i < z.size(); ++i) mu += w[i] * z[i];
  double var = 0.0;
  for (int i = 0; i < z.size(); ++i) var += w[i] * (z[i] - mu) * (z[i] - mu);
  const double sd = std::sqrt(var);
  if (sd == 0.0)
    throw Error("silverman_bandwidth: degenerate support, posterior is "
                "delta-like");
  return 1.06 * sd * std::pow(n_eff, -0.2);
}

WeightedKdeEstimate weighted_kde_1d(const Vector& z, const Vector& w,
                                    std::optional<double> bandwidth,
                                    std::optional<Vector> eval_points) {
  if (z.size() != w.size())
    throw DimensionError("weighted_kde_1d: length mismatch");
  int support = 0;
  for (int i = 0; i < z.size(); ++i) support += w[i] > 0.0 ? 1 : 0;
  if (support < 1) throw Error("weighted_kde_1d: no positive weight");

  WeightedKdeEstimate out;
  out.bandwidth_x = bandwidth ? *bandwidth : silverman_bandwidth(z, w);
  const double h = out.bandwidth_x;
  if (eval_points) {
    out.abscissae_x = *eval_points;
  } else {
    const double lo = z.minCoeff() - 3.0 * h, hi = z.maxCoeff() + 3.0 * h;
    out.abscissae_x = Vector::LinSpaced(512, lo, hi);
  }
  out.densities = Vector::Zero(out.abscissae_x.size());
  for (int i = 0; i < out.abscissae_x.size(); ++i) {
    double d = 0.0;
    for (int j = 0; j < z.size(); ++j)
      if (w[j] > 0.0) d += w[j] * normal_pdf((out.abscissae_x[i] - z[j]) / h);
    out.densities[i] = d / h;
  }
  return out;
}

WeightedKdeEstimate weighted_kde_2d(const Matrix& z, const Vector& w) {
  if (z.cols() != 2) throw DimensionError("weighted_kde_2d: need n x 2 input");
  if (z.rows() != w.size())
    throw DimensionError("weighted_kde_2d: length mismatch");

  WeightedKdeEstimate out;
  out.bandwidth_x = silverman_bandwidth(z.col(0), w);
  out.bandwidth_y = silverman_bandwidth(z.col(1), w);
  const int g = 128;
  out.abscissae_x = Vector::LinSpaced(g, z.col(0).minCoeff() - 3 * out.bandwidth_x,
                                      z.col(0).maxCoeff() + 3 * out.bandwidth_x);
  out.abscissae_y = Vector::LinSpaced(g, z.col(1).minCoeff() - 3 * out.bandwidth_y,
                                      z.col(1).maxCoeff() + 3 * out.bandwidth_y);
  out.densities_2d = Matrix::Zero(g, g);
  for (int j = 0; j < z.rows(); ++j) {
    if (w[j] == 0.0) continue;
    // Product kernel: accumulate the outer product of the axis kernels.
    Vector kx(g), ky(g);
    for (int i = 0; i < g; ++i) {
      kx[i] = normal_pdf((out.abscissae_x[i] - z(j, 0)) / out.bandwidth_x) /
              out.bandwidth_x;
      ky[i] = normal_pdf((out.abscissae_y[i] - z(j, 1)) / out.bandwidth_y) /
              out.bandwidth_y;
    }
    out.densities_2d.noalias() += w[j] * kx * ky.transpose();
  }
  return out;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw Error("normal_quantile: p must be in (0, 1)");
  // Acklam's rational approximation, then two Newton corrections.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double pl = 0.02425;
  double x;
  if (p < pl) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - pl) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = normal_cdf(x) - p;
    x -= e / normal_pdf(x);
  }
  return x;
}

Vector quantile_curve(double mu0, const Vector& f, const Vector& x,
                      double alpha, double beta, double p, bool literal_sqrt) {
  if (f.size() != x.size())
    throw DimensionError("quantile_curve: f and x grids differ");
  const double zp = normal_quantile(p);
  const double exponent_scale = literal_sqrt ? 0.25 : 0.5;
  Vector out(f.size());
  for (int i = 0; i < f.size(); ++i) {
    const double sigma = std::exp(-exponent_scale * (alpha + beta * x[i]));
    out[i] = mu0 + f[i] + sigma * zp;
  }
  return out;
}

}  // namespace lgm
