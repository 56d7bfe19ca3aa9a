#include "lgm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lgm/errors.hpp"

namespace lgm {

double ess(const Vector& weights) {
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw Error("ess: negative weight");
    s1 += weights[i];
    s2 += weights[i] * weights[i];
  }
  if (s2 == 0.0) throw Error("ess: all weights are zero");
  return s1 * s1 / s2;
}

double ne_h(const Vector& weights, const Vector& h_values) {
  if (weights.size() != h_values.size())
    throw DimensionError("ne_h: length mismatch");
  double total = 0.0;
  for (int i = 0; i < weights.size(); ++i)
    total += std::abs(h_values[i]) * weights[i];
  if (total == 0.0) throw Error("ne_h: all |h|*w are zero");
  double s2 = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    const double wt = std::abs(h_values[i]) * weights[i] / total;
    s2 += wt * wt;
  }
  return 1.0 / s2;
}

std::vector<std::pair<double, double>> probability_plot(const Vector& z_values,
                                                        const Vector& weights) {
  const int n = static_cast<int>(z_values.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return z_values[a] < z_values[b]; });
  std::vector<std::pair<double, double>> out;
  out.reserve(n);
  double cum = 0.0;
  for (int l = 0; l < n; ++l) {
    cum += weights[order[l]];
    out.emplace_back(cum, static_cast<double>(l + 1) / n);
  }
  return out;
}

Vector running_ess(const Vector& weights_in_draw_order) {
  const int n = static_cast<int>(weights_in_draw_order.size());
  Vector out(n);
  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double w = weights_in_draw_order[k];
    s1 += w;
    s2 += w * w;
    out[k] = s2 == 0.0 ? 0.0 : s1 * s1 / s2;
  }
  return out;
}

double mh_effective_size(const Vector& chain_values) {
  const int n = static_cast<int>(chain_values.size());
  if (n < 2) return n;
  const double mean = chain_values.mean();
  Vector centered = chain_values.array() - mean;
  const double c0 = centered.squaredNorm() / n;
  if (c0 == 0.0) return 1.0;

  // Initial positive sequence: sum pairs of autocovariances until a pair
  // goes nonpositive.
  auto acov = [&](int lag) {
    double s = 0.0;
    for (int i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
    return s / n;
  };
  double tau = 1.0;
  for (int k = 1; k + 1 < n; k += 2) {
    const double pair = acov(k) + acov(k + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair / c0;
  }
  return std::max(1.0, n / tau);
}

}  // namespace lgm
