#include "lgm/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lgm/errors.hpp"

namespace lgm {

namespace {

constexpr double LOG_2PI = 1.8378770664093454836;
constexpr double NEG_INF = -std::numeric_limits<double>::infinity();

double logsumexp(const std::vector<double>& v) {
  double m = NEG_INF;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return NEG_INF;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// log prior density of theta = log(tau) with tau ~ Gamma(shape, rate);
// includes the log-scale Jacobian.
double hyper_log_prior(double theta, const GammaPrior& p) {
  return p.shape * std::log(p.rate) - std::lgamma(p.shape) + p.shape * theta -
         p.rate * std::exp(theta);
}

void check_model(const ConditionalModel& m) {
  const int n = static_cast<int>(m.y.size());
  if (n < 1) throw DimensionError("ConditionalModel: empty response");
  if (m.Z.rows() != n)
    throw DimensionError("ConditionalModel: design/response size mismatch");
  if (!m.observed.empty() && static_cast<int>(m.observed.size()) != n)
    throw DimensionError("ConditionalModel: observed mask size mismatch");
  if (m.family == LikelihoodFamily::GaussianHeteroscedastic &&
      m.log_precision.size() != n)
    throw DimensionError("ConditionalModel: log_precision size mismatch");
  if (m.rw2) {
    if (static_cast<int>(m.rw2->bin_index.size()) != n)
      throw DimensionError("ConditionalModel: rw2 bin index size mismatch");
    if (m.rw2->n_bins < 3)
      throw DimensionError("ConditionalModel: rw2 needs at least 3 bins");
  }
}

// Latent layout: [beta (p), f (n_bins)].
Matrix design_matrix(const ConditionalModel& m) {
  const int n = static_cast<int>(m.y.size());
  const int p = static_cast<int>(m.Z.cols());
  Matrix A = Matrix::Zero(n, m.latent_dim());
  A.leftCols(p) = m.Z;
  if (m.rw2)
    for (int i = 0; i < n; ++i) A(i, p + m.rw2->bin_index[i]) = 1.0;
  return A;
}

// Observation precisions for a given theta.
Vector obs_weights(const ConditionalModel& m, double theta) {
  const int n = static_cast<int>(m.y.size());
  if (m.family == LikelihoodFamily::Gaussian)
    return Vector::Constant(n, std::exp(theta));
  return m.log_precision.array().exp();
}

// Prior precision of the latent field, jitter folded into the RW2 block.
SparsePrecision prior_precision(const ConditionalModel& m, double theta) {
  const int p = static_cast<int>(m.Z.cols());
  SparsePrecision Q(m.latent_dim());
  for (int j = 0; j < p; ++j) Q.add(j, j, m.beta_prior_precision);
  if (m.rw2) {
    const double tau = m.family == LikelihoodFamily::GaussianHeteroscedastic
                           ? std::exp(theta)
                           : m.rw2->fixed_tau;
    SparsePrecision R = build_rw2_precision(m.rw2->n_bins, tau);
    for (const auto& en : R.entries()) Q.add(p + en.row, p + en.col, en.value);
    for (int k = 0; k < m.rw2->n_bins; ++k) Q.add(p + k, p + k, m.rw2_jitter);
  }
  return Q;
}

LinearConstraint sum_to_zero_constraint(const ConditionalModel& m) {
  LinearConstraint c;
  if (!m.rw2) return c;
  const int p = static_cast<int>(m.Z.cols());
  c.A = Matrix::Zero(1, m.latent_dim());
  c.A.block(0, p, 1, m.rw2->n_bins).setOnes();
  c.e = Vector::Zero(1);
  return c;
}

double log_likelihood(const ConditionalModel& m, const Vector& eta,
                      const Vector& w) {
  double ll = 0.0;
  for (int i = 0; i < m.y.size(); ++i) {
    if (!m.is_observed(i)) continue;
    const double r = m.y[i] - eta[i];
    ll += 0.5 * (std::log(w[i]) - LOG_2PI) - 0.5 * w[i] * r * r;
  }
  return ll;
}

struct NodeFit {
  GaussianApprox approx;
  double laplace;      // log evidence at this theta, no hyperprior mass
  double log_det_post; // of the posterior precision
};

NodeFit fit_node(const ConditionalModel& m, double theta,
                 const FitterOptions& opts) {
  const Matrix A = design_matrix(m);
  const Vector w = obs_weights(m, theta);
  if (!w.allFinite())
    throw FitError("gaussian_approximation: observation precision overflow");
  const SparsePrecision Q0 = prior_precision(m, theta);
  const int d = m.latent_dim();

  // Posterior precision Q0 + A^T W A over observed rows.
  Matrix AtWA = Matrix::Zero(d, d);
  for (int i = 0; i < m.y.size(); ++i) {
    if (!m.is_observed(i)) continue;
    AtWA.noalias() += w[i] * A.row(i).transpose() * A.row(i);
  }
  SparsePrecision Qpost(d);
  for (const auto& en : Q0.entries()) Qpost.add(en.row, en.col, en.value);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c <= r; ++c)
      if (AtWA(r, c) != 0.0) Qpost.add(r, c, AtWA(r, c));

  CholeskyFactor Fpost;
  try {
    Fpost = cholesky(Qpost);
  } catch (const FactorizationError& e) {
    throw FitError(std::string("gaussian_approximation: ") + e.what());
  }

  // Newton on the latent field; the Gaussian likelihood makes the objective
  // quadratic, so this converges in a single step.
  Vector x = Vector::Zero(d);
  bool converged = false;
  int iter = 0;
  for (; iter <= opts.max_newton_iters; ++iter) {
    Vector eta = A * x;
    Vector grad = -Q0.multiply(x);
    for (int i = 0; i < m.y.size(); ++i) {
      if (!m.is_observed(i)) continue;
      grad.noalias() += w[i] * (m.y[i] - eta[i]) * A.row(i).transpose();
    }
    if (grad.lpNorm<Eigen::Infinity>() < opts.newton_tol) {
      converged = true;
      break;
    }
    if (iter == opts.max_newton_iters) break;
    x += Fpost.solve(grad);
  }
  if (!converged)
    throw FitError("gaussian_approximation: Newton did not converge");

  const CholeskyFactor F0 = cholesky(Q0);
  const double laplace = log_likelihood(m, A * x, w) +
                         0.5 * (F0.log_det() - Fpost.log_det()) -
                         0.5 * (Q0.quad_form(x));

  return NodeFit{GaussianApprox{x, std::move(Qpost), true, iter}, laplace,
                 Fpost.log_det()};
}

}  // namespace

int ConditionalModel::n_obs() const {
  if (observed.empty()) return static_cast<int>(y.size());
  int k = 0;
  for (bool b : observed) k += b ? 1 : 0;
  return k;
}

int ConditionalModel::latent_dim() const {
  return static_cast<int>(Z.cols()) + (rw2 ? rw2->n_bins : 0);
}

bool ConditionalModel::has_hyper() const {
  return family == LikelihoodFamily::Gaussian || rw2.has_value();
}

double MarginalGrid::integral() const {
  double s = 0.0;
  for (int i = 1; i < abscissae.size(); ++i)
    s += 0.5 * (densities[i] + densities[i - 1]) *
         (abscissae[i] - abscissae[i - 1]);
  return s;
}

void MarginalGrid::normalize() {
  const double s = integral();
  if (s <= 0.0) throw Error("MarginalGrid::normalize: zero total mass");
  densities /= s;
}

double MarginalGrid::mean() const {
  double s = 0.0;
  for (int i = 1; i < abscissae.size(); ++i) {
    const double h = abscissae[i] - abscissae[i - 1];
    s += 0.5 * h *
         (abscissae[i] * densities[i] + abscissae[i - 1] * densities[i - 1]);
  }
  return s / integral();
}

double MarginalGrid::sd() const {
  const double mu = mean();
  double s = 0.0;
  for (int i = 1; i < abscissae.size(); ++i) {
    const double h = abscissae[i] - abscissae[i - 1];
    const double a = (abscissae[i] - mu) * (abscissae[i] - mu) * densities[i];
    const double b = (abscissae[i - 1] - mu) * (abscissae[i - 1] - mu) *
                     densities[i - 1];
    s += 0.5 * h * (a + b);
  }
  return std::sqrt(std::max(0.0, s / integral()));
}

double MarginalGrid::density_at(double x) const {
  const int n = static_cast<int>(abscissae.size());
  if (n == 0 || x < abscissae[0] || x > abscissae[n - 1]) return 0.0;
  const auto it =
      std::upper_bound(abscissae.data(), abscissae.data() + n, x);
  int hi = static_cast<int>(it - abscissae.data());
  if (hi == 0) return densities[0];
  if (hi == n) return densities[n - 1];
  const double t =
      (x - abscissae[hi - 1]) / (abscissae[hi] - abscissae[hi - 1]);
  return (1.0 - t) * densities[hi - 1] + t * densities[hi];
}

GaussianApprox gaussian_approximation(const ConditionalModel& model,
                                      double theta,
                                      const FitterOptions& opts) {
  check_model(model);
  return fit_node(model, theta, opts).approx;
}

double laplace_log_evidence(const ConditionalModel& model, double theta,
                            const FitterOptions& opts) {
  check_model(model);
  return fit_node(model, theta, opts).laplace;
}

ThetaGrid build_theta_grid(const ConditionalModel& model, int n_nodes,
                           const FitterOptions& opts) {
  check_model(model);
  if (!model.has_hyper()) return ThetaGrid::single(0.0);
  if (n_nodes < 1 || n_nodes % 2 == 0)
    throw Error("build_theta_grid: n_nodes must be odd and >= 1");

  auto objective = [&](double theta) {
    return fit_node(model, theta, opts).laplace +
           hyper_log_prior(theta, model.hyper_prior);
  };

  // Coarse scan, then golden-section refinement around the best node.
  double best_theta = 0.0, best_val = NEG_INF;
  for (int k = -12; k <= 12; ++k) {
    try {
      const double v = objective(k);
      if (v > best_val) {
        best_val = v;
        best_theta = k;
      }
    } catch (const FitError&) {
    }
  }
  if (!std::isfinite(best_val)) {
    ThetaGrid g = ThetaGrid::single(
        std::log(model.hyper_prior.shape / model.hyper_prior.rate));
    g.degraded = true;
    return g;
  }

  double a = best_theta - 1.2, b = best_theta + 1.2;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
  double f1 = objective(c1), f2 = objective(c2);
  while (b - a > 1e-4) {
    if (f1 < f2) {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + gr * (b - a);
      f2 = objective(c2);
    } else {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - gr * (b - a);
      f1 = objective(c1);
    }
  }
  const double mode = 0.5 * (a + b);

  // Posterior sd in theta from the curvature at the mode.
  const double delta = 0.1;
  const double h0 = objective(mode);
  const double hm = objective(mode - delta), hp = objective(mode + delta);
  const double curv = (hp - 2.0 * h0 + hm) / (delta * delta);
  double sd = curv < 0.0 ? 1.0 / std::sqrt(-curv) : 1.0;
  sd = std::clamp(sd, 1e-2, 10.0);

  ThetaGrid grid;
  const double step = 0.7 * sd;
  const int half = (n_nodes - 1) / 2;
  for (int k = -half; k <= half; ++k) {
    const double theta = mode + k * step;
    grid.nodes.push_back(theta);
    const double mass = n_nodes == 1 ? 0.0 : std::log(step);
    grid.log_mass.push_back(hyper_log_prior(theta, model.hyper_prior) + mass);
  }
  return grid;
}

namespace {

// Laplace values per node; failed nodes are dropped and the remaining mass
// rescaled.
struct GridEval {
  std::vector<int> ok;  // surviving node indices
  std::vector<double> laplace;
  std::vector<double> log_mass;  // renormalized
  bool degraded = false;
};

GridEval evaluate_grid(const ConditionalModel& m, const ThetaGrid& grid,
                       const FitterOptions& opts,
                       std::vector<NodeFit>* fits = nullptr) {
  GridEval ev;
  std::vector<double> mass_all, mass_ok;
  for (size_t g = 0; g < grid.nodes.size(); ++g) {
    mass_all.push_back(grid.log_mass[g]);
    try {
      NodeFit nf = fit_node(m, grid.nodes[g], opts);
      ev.ok.push_back(static_cast<int>(g));
      ev.laplace.push_back(nf.laplace);
      ev.log_mass.push_back(grid.log_mass[g]);
      mass_ok.push_back(grid.log_mass[g]);
      if (fits) fits->push_back(std::move(nf));
    } catch (const FitError&) {
      ev.degraded = true;
    }
  }
  if (ev.ok.empty())
    throw FitError("conditional fit failed at every theta node");
  if (ev.degraded) {
    const double shift = logsumexp(mass_all) - logsumexp(mass_ok);
    for (double& lm : ev.log_mass) lm += shift;
  }
  ev.degraded = ev.degraded || grid.degraded;
  return ev;
}

}  // namespace

double conditional_log_evidence(const ConditionalModel& model,
                                const ThetaGrid& grid,
                                const FitterOptions& opts) {
  check_model(model);
  GridEval ev = evaluate_grid(model, grid, opts);
  std::vector<double> terms(ev.ok.size());
  for (size_t g = 0; g < ev.ok.size(); ++g)
    terms[g] = ev.laplace[g] + ev.log_mass[g];
  return logsumexp(terms);
}

double exact_gaussian_evidence(const ConditionalModel& model, double theta) {
  check_model(model);
  const Matrix A = design_matrix(model);
  const Vector w = obs_weights(model, theta);
  const Matrix Q0 = prior_precision(model, theta).dense();

  std::vector<int> obs;
  for (int i = 0; i < model.y.size(); ++i)
    if (model.is_observed(i)) obs.push_back(i);
  const int n = static_cast<int>(obs.size());

  Matrix Ao(n, A.cols());
  Vector yo(n);
  for (int i = 0; i < n; ++i) {
    Ao.row(i) = A.row(obs[i]);
    yo[i] = model.y[obs[i]];
  }
  Matrix cov = Ao * Q0.llt().solve(Ao.transpose());
  for (int i = 0; i < n; ++i) cov(i, i) += 1.0 / w[obs[i]];

  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw FitError("exact_gaussian_evidence: response covariance not SPD");
  const Vector alpha = llt.solve(yo);
  double log_det = 0.0;
  for (int i = 0; i < n; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * n * LOG_2PI - 0.5 * log_det - 0.5 * yo.dot(alpha);
}

FitResult latent_marginals(const ConditionalModel& model, const ThetaGrid& grid,
                           const FitterOptions& opts) {
  check_model(model);
  std::vector<NodeFit> fits;
  GridEval ev = evaluate_grid(model, grid, opts, &fits);
  const int G = static_cast<int>(ev.ok.size());
  const int d = model.latent_dim();
  const int p = static_cast<int>(model.Z.cols());

  std::vector<double> terms(G);
  for (int g = 0; g < G; ++g) terms[g] = ev.laplace[g] + ev.log_mass[g];
  const double log_ev = logsumexp(terms);

  Vector node_weight(G);
  for (int g = 0; g < G; ++g) node_weight[g] = std::exp(terms[g] - log_ev);

  // Per-node posterior mean and variance of each latent component, with the
  // sum-to-zero correction applied when an RW2 term is present.
  const LinearConstraint con = sum_to_zero_constraint(model);
  Matrix mean(G, d), var(G, d);
  for (int g = 0; g < G; ++g) {
    const CholeskyFactor F = cholesky(fits[g].approx.Qpost);
    Vector mu = fits[g].approx.mode;
    Vector v(d);
    Vector unit = Vector::Zero(d);
    for (int k = 0; k < d; ++k) {
      unit[k] = 1.0;
      v[k] = F.solve(unit)[k];
      unit[k] = 0.0;
    }
    if (!con.empty()) {
      Vector W = F.solve(con.A.row(0).transpose());
      const double S = con.A.row(0).dot(W);
      mu -= W * (con.A.row(0).dot(mu) / S);
      for (int k = 0; k < d; ++k) v[k] = std::max(1e-300, v[k] - W[k] * W[k] / S);
    }
    mean.row(g) = mu;
    var.row(g) = v;
  }

  FitResult out;
  out.log_evidence = log_ev;
  out.degraded = ev.degraded;

  auto mixture_grid = [&](int k) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int g = 0; g < G; ++g) {
      const double s = std::sqrt(var(g, k));
      lo = std::min(lo, mean(g, k) - 5.0 * s);
      hi = std::max(hi, mean(g, k) + 5.0 * s);
    }
    MarginalGrid mg;
    mg.abscissae = Vector::LinSpaced(opts.marginal_points, lo, hi);
    mg.densities = Vector::Zero(opts.marginal_points);
    for (int g = 0; g < G; ++g) {
      const double s2 = var(g, k);
      for (int i = 0; i < opts.marginal_points; ++i) {
        const double r = mg.abscissae[i] - mean(g, k);
        mg.densities[i] += node_weight[g] *
                           std::exp(-0.5 * r * r / s2 - 0.5 * std::log(s2) -
                                    0.5 * LOG_2PI);
      }
    }
    mg.normalize();
    return mg;
  };

  for (int j = 0; j < p; ++j) {
    const std::string name = j < static_cast<int>(model.beta_names.size())
                                 ? model.beta_names[j]
                                 : "beta" + std::to_string(j);
    out.marginals.emplace(name, mixture_grid(j));
  }

  if (model.rw2) {
    out.smooth_mean = Vector::Zero(model.rw2->n_bins);
    out.smooth_sd = Vector::Zero(model.rw2->n_bins);
    for (int k = 0; k < model.rw2->n_bins; ++k) {
      double m1 = 0.0, m2 = 0.0;
      for (int g = 0; g < G; ++g) {
        m1 += node_weight[g] * mean(g, p + k);
        m2 += node_weight[g] * (var(g, p + k) + mean(g, p + k) * mean(g, p + k));
      }
      out.smooth_mean[k] = m1;
      out.smooth_sd[k] = std::sqrt(std::max(0.0, m2 - m1 * m1));
    }
  }

  // Hyperparameter marginal on the precision scale, from the grid posterior.
  if (model.has_hyper() && G >= 3) {
    std::vector<double> theta_ok(G), post(G);
    for (int g = 0; g < G; ++g) {
      theta_ok[g] = grid.nodes[ev.ok[g]];
      post[g] = ev.laplace[g] +
                hyper_log_prior(theta_ok[g], model.hyper_prior);
    }
    MarginalGrid mg;
    mg.abscissae = Vector::Zero(opts.marginal_points);
    mg.densities = Vector::Zero(opts.marginal_points);
    const double t0 = theta_ok.front(), t1 = theta_ok.back();
    for (int i = 0; i < opts.marginal_points; ++i) {
      const double th = t0 + (t1 - t0) * i / (opts.marginal_points - 1);
      // piecewise-linear interpolation of the log grid posterior
      int seg = 0;
      while (seg + 2 < G && theta_ok[seg + 1] < th) ++seg;
      const double t = (th - theta_ok[seg]) / (theta_ok[seg + 1] - theta_ok[seg]);
      const double lp = (1.0 - t) * post[seg] + t * post[seg + 1];
      mg.abscissae[i] = std::exp(th);
      mg.densities[i] = std::exp(lp - post[(G - 1) / 2] - th);
    }
    mg.normalize();
    out.marginals.emplace(model.hyper_name, std::move(mg));
  }

  return out;
}

FitResult fit(const ConditionalModel& model, const FitterOptions& opts) {
  return latent_marginals(model, build_theta_grid(model, opts.theta_nodes, opts),
                          opts);
}

}  // namespace lgm
