#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lgm/gmrf.hpp"

namespace lgm {

// (sum w)^2 / sum w^2; invariant to positive rescaling.
double ess(const Vector& weights);

// Function-dependent effective sample size with weights |h_i| w_i.
double ne_h(const Vector& weights, const Vector& h_values);

// Weighted empirical CDF against the uniform theoretical CDF: pairs
// (cumulative reordered weight, l/n) for z sorted ascending. Ties in z are
// broken by draw index.
std::vector<std::pair<double, double>> probability_plot(const Vector& z_values,
                                                        const Vector& weights);

// Element k is ess(weights[0..k]) in draw order.
Vector running_ess(const Vector& weights_in_draw_order);

// Effective size of an MH chain component: N over the integrated
// autocorrelation time (initial positive sequence estimator).
double mh_effective_size(const Vector& chain_values);

struct DiagnosticsReport {
  double ess = 0.0;
  Vector running_ess;
  std::map<std::string, double> ne_h;
  std::map<std::string, std::vector<std::pair<double, double>>> pplot;
  int n_failed_fits = 0;
  double runtime_seconds = 0.0;
  bool mh_adjusted = false;  // ne_h entries are autocorrelation-adjusted
};

}  // namespace lgm
