#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lgm/fitter.hpp"
#include "lgm/samplers.hpp"

namespace lgm {

// Posterior marginal of one non-conditioned parameter, mixed across weighted
// samples' conditional fits on a common 200-point grid.
struct MixedMarginal {
  std::string name;
  Vector abscissae;
  Vector densities;
};

struct WeightedKdeEstimate {
  Vector abscissae_x;       // 1-D grid, or x axis of the 2-D grid
  Vector abscissae_y;       // empty for 1-D
  Vector densities;         // 1-D
  Matrix densities_2d;      // 2-D (x index = row)
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;
};

MixedMarginal mix_marginals(const std::vector<WeightedSample>& samples,
                            const Vector& normalized_weights,
                            const std::string& param);

WeightedKdeEstimate weighted_kde_1d(
    const Vector& z, const Vector& normalized_weights,
    std::optional<double> bandwidth = std::nullopt,
    std::optional<Vector> eval_points = std::nullopt);

WeightedKdeEstimate weighted_kde_2d(const Matrix& z,  // n x 2
                                    const Vector& normalized_weights);

// Weighted Silverman bandwidth with the effective sample size as n.
double silverman_bandwidth(const Vector& z, const Vector& normalized_weights);

// Standard normal quantile, accurate to better than 1e-9.
double normal_quantile(double p);

// Gaussian quantile curve y_p(x) = mu0 + f(x) + sigma(x) * z_p with
// log sigma(x) = -(alpha + beta x)/2. `literal_sqrt` halves the exponent
// again, reproducing the alternative square-root form.
Vector quantile_curve(double mu0, const Vector& f, const Vector& x,
                      double alpha, double beta, double p,
                      bool literal_sqrt = false);

}  // namespace lgm
