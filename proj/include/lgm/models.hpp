#pragma once

#include <string>

#include "lgm/data.hpp"
#include "lgm/samplers.hpp"

namespace lgm {

// A model plug-in: the sampler-facing adapter plus per-model defaults for the
// initial proposal and the MH random walk.
struct ModelSetup {
  TargetAdapter target;
  ProposalParams g0;
  Matrix mh_step_sigma;
  Vector mh_z0;
};

// y regressed on x1, x2 with the two slopes conditioned on; nearly flat
// Gaussian priors (precision 1e-6) keep the weights proper.
ModelSetup bivariate_linear_adapter(const Dataset& data);

// All regression coefficients conditioned on, with independent Laplace(0,
// 1/lambda) priors; response column "y", every other column a covariate.
ModelSetup lasso_adapter(const Dataset& data, double lambda);

// The missing entries of covariate "x" conditioned on; Gaussian prior
// centered at the observed-covariate mean with sd twice the observed sd.
ModelSetup missing_covariate_adapter(const Dataset& data);

// Heteroscedastic Gaussian with log precision alpha + beta * x (covariate
// standardized internally) and a binned RW2 smooth in the mean.
ModelSetup quantile_rw2_adapter(const Dataset& data, int n_bins = 50);

Dataset simulate_dataset(const std::string& model_id, std::uint64_t seed,
                         int n);

// True values behind the NA cells of the missing-covariate generator,
// in row order.
Vector missing_true_values(std::uint64_t seed, int n);

// Bin centers used by the quantile adapter for a given covariate column.
Vector rw2_bin_centers(const Vector& x, int n_bins);

}  // namespace lgm
