#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lgm/gmrf.hpp"

namespace lgm {

enum class LikelihoodFamily {
  Gaussian,               // single observation precision tau = exp(theta)
  GaussianHeteroscedastic // fixed per-observation log-precision vector
};

struct GammaPrior {
  double shape = 1.0;
  double rate = 5e-5;
};

// Smooth effect of a binned covariate with a second-order random-walk prior.
struct Rw2Term {
  std::vector<int> bin_index;  // per observation, into 0..n_bins-1
  int n_bins = 0;
  // Used only when the observation precision owns the hyperparameter;
  // otherwise the smoothing precision is exp(theta).
  double fixed_tau = 1.0;
};

// A latent Gaussian model with the conditioning parameters already folded in.
struct ConditionalModel {
  LikelihoodFamily family = LikelihoodFamily::Gaussian;
  Vector y;
  std::vector<bool> observed;  // empty means all observed
  Matrix Z;                    // n x n_beta fixed-effect design, incl. intercept
  std::vector<std::string> beta_names;
  std::optional<Rw2Term> rw2;
  Vector log_precision;        // heteroscedastic only, length n

  double beta_prior_precision = 1e-3;
  GammaPrior hyper_prior;      // on the precision governed by theta
  std::string hyper_name = "tau";
  double rw2_jitter = 1e-5;

  int n_obs() const;           // observed responses only
  int latent_dim() const;
  bool has_hyper() const;
  bool is_observed(int i) const {
    return observed.empty() || observed[static_cast<size_t>(i)];
  }
};

struct ThetaGrid {
  std::vector<double> nodes;     // log-precision scale
  std::vector<double> log_mass;  // log pi(theta_g) + log Delta_g
  bool degraded = false;

  static ThetaGrid single(double theta) { return ThetaGrid{{theta}, {0.0}}; }
};

struct GaussianApprox {
  Vector mode;  // unconstrained mode of the latent field
  SparsePrecision Qpost;
  bool converged = false;
  int iterations = 0;
};

struct MarginalGrid {
  Vector abscissae;  // strictly increasing
  Vector densities;  // nonnegative

  double integral() const;  // trapezoid
  void normalize();
  double mean() const;
  double sd() const;
  // Linear interpolation, zero outside the grid range.
  double density_at(double x) const;
};

struct FitResult {
  double log_evidence = 0.0;
  std::map<std::string, MarginalGrid> marginals;  // fixed effects + hyper
  Vector smooth_mean;  // RW2 bin posterior means (empty without the term)
  Vector smooth_sd;
  bool degraded = false;
};

struct FitterOptions {
  int theta_nodes = 9;
  int marginal_points = 75;
  double newton_tol = 1e-8;
  int max_newton_iters = 30;
};

GaussianApprox gaussian_approximation(const ConditionalModel& model,
                                      double theta,
                                      const FitterOptions& opts = {});

// Laplace log evidence at a single theta, no hyperprior mass.
double laplace_log_evidence(const ConditionalModel& model, double theta,
                            const FitterOptions& opts = {});

double conditional_log_evidence(const ConditionalModel& model,
                                const ThetaGrid& grid,
                                const FitterOptions& opts = {});

// Closed-form marginal likelihood for the all-linear-Gaussian case.
double exact_gaussian_evidence(const ConditionalModel& model, double theta);

FitResult latent_marginals(const ConditionalModel& model, const ThetaGrid& grid,
                           const FitterOptions& opts = {});

ThetaGrid build_theta_grid(const ConditionalModel& model, int n_nodes,
                           const FitterOptions& opts = {});

// Grid construction followed by marginal assembly; what samplers call per draw.
FitResult fit(const ConditionalModel& model, const FitterOptions& opts = {});

}  // namespace lgm
