#include "lgm/models.hpp"

#include <cmath>
#include <limits>

#include "lgm/errors.hpp"
#include "lgm/rng.hpp"

namespace lgm {

namespace {

constexpr double LOG_2PI = 1.8378770664093454836;

double gaussian_log_prior(const Vector& z, double precision) {
  double lp = 0.0;
  for (int k = 0; k < z.size(); ++k)
    lp += 0.5 * (std::log(precision) - LOG_2PI) - 0.5 * precision * z[k] * z[k];
  return lp;
}

}  // namespace

ModelSetup bivariate_linear_adapter(const Dataset& data) {
  const Vector y = data.col("y");
  const Vector x1 = data.col("x1");
  const Vector x2 = data.col("x2");
  const int n = static_cast<int>(y.size());

  ModelSetup setup;
  setup.target.z_names = {"beta1", "beta2"};
  setup.target.log_prior = [](const Vector& z) {
    return gaussian_log_prior(z, 1e-6);  // effectively flat, still proper
  };
  setup.target.build_model = [y, x1, x2, n](const Vector& z) {
    ConditionalModel m;
    m.family = LikelihoodFamily::Gaussian;
    m.y = y - z[0] * x1 - z[1] * x2;
    m.Z = Matrix::Ones(n, 1);
    m.beta_names = {"beta0"};
    return m;
  };
  setup.g0.family = ProposalFamily::Gaussian;
  setup.g0.mu = Vector::Zero(2);
  setup.g0.sigma = 5.0 * Matrix::Identity(2, 2);
  setup.mh_step_sigma = 0.75 * 0.75 * Matrix::Identity(2, 2);
  setup.mh_z0 = Vector::Zero(2);
  return setup;
}

ModelSetup lasso_adapter(const Dataset& data, double lambda) {
  if (lambda <= 0.0) throw DataError("lasso_adapter: lambda must be positive");
  const Vector y = data.col("y");
  const int n = static_cast<int>(y.size());
  std::vector<std::string> names;
  for (const auto& c : data.columns)
    if (c != "y") names.push_back(c);
  if (names.empty()) throw DataError("lasso_adapter: no covariate columns");
  const int p = static_cast<int>(names.size());
  Matrix X(n, p);
  for (int j = 0; j < p; ++j) X.col(j) = data.col(names[j]);

  const Matrix XtX = X.transpose() * X;
  Eigen::FullPivLU<Matrix> lu(XtX);
  if (!lu.isInvertible())
    throw DataError(
        "lasso_adapter: X^T X is singular; consider adding a ridge jitter to "
        "the covariates");

  ModelSetup setup;
  setup.target.z_names = names;
  const double sigma = 1.0 / lambda;
  setup.target.log_prior = [sigma](const Vector& z) {
    double lp = 0.0;
    for (int k = 0; k < z.size(); ++k)
      lp += -std::log(2.0 * sigma) - std::abs(z[k]) / sigma;
    return lp;
  };
  setup.target.build_model = [y, X, n](const Vector& z) {
    ConditionalModel m;
    m.family = LikelihoodFamily::Gaussian;
    m.y = y - X * z;
    m.Z = Matrix::Ones(n, 1);
    m.beta_names = {"intercept"};
    return m;
  };
  // Least squares (with intercept) anchors the initial proposal; the scale is
  // the OLS coefficient covariance inflated 4x, with heavy tails on top.
  Matrix Xa(n, p + 1);
  Xa.col(0).setOnes();
  Xa.rightCols(p) = X;
  const Vector coef = (Xa.transpose() * Xa).ldlt().solve(Xa.transpose() * y);
  const Vector resid = y - Xa * coef;
  const double s2 = resid.squaredNorm() / std::max(1, n - p - 1);

  setup.g0.family = ProposalFamily::StudentT;
  setup.g0.nu = 3.0;
  setup.g0.mu = coef.tail(p);
  setup.g0.sigma = 4.0 * s2 * lu.inverse();
  setup.mh_step_sigma = s2 * (4.0 * XtX).inverse();
  setup.mh_z0 = coef.tail(p);
  return setup;
}

ModelSetup missing_covariate_adapter(const Dataset& data) {
  const Vector y = data.col("y");
  const Vector x = data.col("x");
  const std::vector<bool> x_miss = data.missing_mask("x");
  const std::vector<bool> y_miss = data.missing_mask("y");
  const int n = static_cast<int>(y.size());

  std::vector<int> mis_rows;
  double sum = 0.0, sum2 = 0.0;
  int n_obs = 0;
  for (int i = 0; i < n; ++i) {
    if (x_miss[i]) {
      mis_rows.push_back(i);
    } else {
      sum += x[i];
      sum2 += x[i] * x[i];
      ++n_obs;
    }
  }
  if (mis_rows.empty())
    throw DataError("missing_covariate_adapter: nothing to impute");
  if (n_obs < 2)
    throw DataError("missing_covariate_adapter: too few observed covariates");
  const double mean = sum / n_obs;
  const double sd = std::sqrt((sum2 - n_obs * mean * mean) / (n_obs - 1));
  const double prior_sd = 2.0 * sd;
  const int m = static_cast<int>(mis_rows.size());

  ModelSetup setup;
  for (int r : mis_rows) setup.target.z_names.push_back("x_" + std::to_string(r));
  setup.target.log_prior = [mean, prior_sd, m](const Vector& z) {
    double lp = 0.0;
    for (int k = 0; k < m; ++k) {
      const double r = (z[k] - mean) / prior_sd;
      lp += -0.5 * LOG_2PI - std::log(prior_sd) - 0.5 * r * r;
    }
    return lp;
  };
  setup.target.build_model = [y, x, y_miss, mis_rows, n](const Vector& z) {
    Vector xc = x;
    for (size_t k = 0; k < mis_rows.size(); ++k) xc[mis_rows[k]] = z[k];
    ConditionalModel mdl;
    mdl.family = LikelihoodFamily::Gaussian;
    mdl.y = y;
    std::vector<bool> observed(n);
    for (int i = 0; i < n; ++i) observed[i] = !y_miss[i];
    mdl.observed = std::move(observed);
    mdl.Z = Matrix::Ones(n, 2);
    mdl.Z.col(1) = xc;
    mdl.beta_names = {"beta0", "beta1"};
    return mdl;
  };
  // Initial proposal: per-cell precision-weighted blend of the covariate
  // prior with the regression line inverted at the observed response. As the
  // slope estimate weakens this degrades smoothly to the prior.
  double b0 = 0.0, b1 = 0.0, s2 = sd * sd;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int k = 0;
    for (int i = 0; i < n; ++i) {
      if (x_miss[i] || y_miss[i]) continue;
      sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
      ++k;
    }
    const double den = k * sxx - sx * sx;
    if (k >= 3 && den > 0.0) {
      b1 = (k * sxy - sx * sy) / den;
      b0 = (sy - b1 * sx) / k;
      double rss = 0.0;
      for (int i = 0; i < n; ++i) {
        if (x_miss[i] || y_miss[i]) continue;
        const double r = y[i] - b0 - b1 * x[i];
        rss += r * r;
      }
      s2 = rss / std::max(1, k - 2);
    }
  }
  const double prior_prec = 1.0 / (prior_sd * prior_sd);
  Vector mu0(m);
  Matrix sig0 = Matrix::Zero(m, m);
  Matrix step = Matrix::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    const int i = mis_rows[k];
    const double like_prec = y_miss[i] || s2 <= 0.0 ? 0.0 : b1 * b1 / s2;
    const double prec = prior_prec + like_prec;
    mu0[k] = (prior_prec * mean +
              (like_prec > 0.0 ? like_prec * (y[i] - b0) / b1 : 0.0)) /
             prec;
    sig0(k, k) = 2.0 / prec;  // inflated to stay wider than the target
    step(k, k) = 1.0 / prec;
  }
  setup.g0.family = ProposalFamily::Gaussian;
  setup.g0.mu = mu0;
  setup.g0.sigma = sig0;
  setup.mh_step_sigma = step;
  setup.mh_z0 = mu0;
  return setup;
}

Vector rw2_bin_centers(const Vector& x, int n_bins) {
  const double lo = x.minCoeff(), hi = x.maxCoeff();
  const double w = (hi - lo) / n_bins;
  Vector centers(n_bins);
  for (int k = 0; k < n_bins; ++k) centers[k] = lo + (k + 0.5) * w;
  return centers;
}

ModelSetup quantile_rw2_adapter(const Dataset& data, int n_bins) {
  const Vector x = data.col("x");
  const Vector y = data.col("y");
  const int n = static_cast<int>(x.size());

  const double lo = x.minCoeff(), hi = x.maxCoeff();
  const double width = (hi - lo) / n_bins;
  if (width <= 0.0) throw DataError("quantile_rw2_adapter: constant covariate");
  std::vector<int> bin(n);
  std::vector<bool> used(n_bins, false);
  for (int i = 0; i < n; ++i) {
    bin[i] = std::min(n_bins - 1, static_cast<int>((x[i] - lo) / width));
    used[bin[i]] = true;
  }
  int distinct = 0;
  for (bool u : used) distinct += u ? 1 : 0;
  if (distinct < 3)
    throw DataError("quantile_rw2_adapter: fewer than 3 distinct bins");

  // The variance model uses the standardized covariate so the conditioning
  // parameters live on a unit scale.
  const double x_mean = x.mean();
  const double x_sd = std::sqrt((x.array() - x_mean).square().sum() / (n - 1));
  Vector xs = (x.array() - x_mean) / x_sd;

  ModelSetup setup;
  setup.target.z_names = {"alpha", "beta"};
  setup.target.log_prior = [](const Vector& z) {
    // Vague Gaussian, truncated far out to keep exp(log-precision) finite.
    if (std::abs(z[0]) > 200.0 || std::abs(z[1]) > 200.0)
      return -std::numeric_limits<double>::infinity();
    return gaussian_log_prior(z, 1e-3);
  };
  setup.target.build_model = [y, xs, bin, n_bins, n](const Vector& z) {
    ConditionalModel m;
    m.family = LikelihoodFamily::GaussianHeteroscedastic;
    m.y = y;
    m.log_precision = z[0] + z[1] * xs.array();
    m.Z = Matrix::Ones(n, 1);
    m.beta_names = {"mu0"};
    m.rw2 = Rw2Term{bin, n_bins};
    m.hyper_name = "tau_rw";
    return m;
  };
  setup.g0.family = ProposalFamily::StudentT;
  setup.g0.nu = 3.0;
  setup.g0.mu = Vector::Zero(2);
  setup.g0.sigma = 10.0 * Matrix::Identity(2, 2);
  setup.mh_step_sigma = 0.75 * 0.75 * Matrix::Identity(2, 2);
  setup.mh_z0 = Vector::Zero(2);
  return setup;
}

Dataset simulate_dataset(const std::string& model_id, std::uint64_t seed,
                         int n) {
  Dataset d;
  if (model_id == "bivariate") {
    Vector y(n), x1(n), x2(n);
    for (int i = 0; i < n; ++i) {
      RngStream rng(seed, 0, i);
      x1[i] = rng.next_uniform();
      x2[i] = rng.next_uniform();
      y[i] = 1.0 + x1[i] - x2[i] + rng.next_normal();
    }
    d.add_column("y", y);
    d.add_column("x1", x1);
    d.add_column("x2", x2);
  } else if (model_id == "lasso") {
    const Vector beta_true = (Vector(5) << 1.5, -2.0, 0.0, 0.0, 1.0).finished();
    Matrix X(n, 5);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      RngStream rng(seed, 0, i);
      for (int j = 0; j < 5; ++j) X(i, j) = rng.next_normal();
      y[i] = 0.5 + X.row(i).dot(beta_true) + rng.next_normal();
    }
    d.add_column("y", y);
    for (int j = 0; j < 5; ++j) d.add_column("x" + std::to_string(j + 1), X.col(j));
  } else if (model_id == "missing") {
    Vector y(n), x(n);
    std::vector<bool> miss(n, false);
    for (int i = 0; i < n; ++i) {
      RngStream rng(seed, 0, i);
      x[i] = rng.next_normal();
      y[i] = 1.0 + 2.0 * x[i] + 0.5 * rng.next_normal();
      if (i % 3 == 0) miss[i] = true;  // every third covariate unobserved
    }
    Vector x_masked = x;
    for (int i = 0; i < n; ++i)
      if (miss[i]) x_masked[i] = 0.0;
    d.add_column("y", y);
    d.add_column("x", x_masked, miss);
  } else if (model_id == "quantile") {
    Vector x(n), y(n);
    for (int i = 0; i < n; ++i) {
      RngStream rng(seed, 0, i);
      x[i] = 390.0 + 330.0 * (i + 0.5) / n;
      const double f0 = 0.05 - 0.8 / (1.0 + std::exp(-(x[i] - 600.0) / 40.0));
      const double sd = 0.02 + 0.08 * (x[i] - 390.0) / 330.0;
      y[i] = f0 + sd * rng.next_normal();
    }
    d.add_column("x", x);
    d.add_column("y", y);
  } else {
    throw DataError("simulate_dataset: unknown model id '" + model_id + "'");
  }
  return d;
}

Vector missing_true_values(std::uint64_t seed, int n) {
  std::vector<double> truth;
  for (int i = 0; i < n; ++i) {
    RngStream rng(seed, 0, i);
    const double x = rng.next_normal();
    if (i % 3 == 0) truth.push_back(x);
  }
  return Eigen::Map<Vector>(truth.data(), static_cast<int>(truth.size()));
}

}  // namespace lgm
