// Acceptance gate: ten end-to-end criteria, one PASS/FAIL line each.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lgm/cli.hpp"
#include "lgm/diagnostics.hpp"
#include "lgm/errors.hpp"
#include "lgm/marginals.hpp"
#include "lgm/fitter.hpp"
#include "lgm/models.hpp"
#include "lgm/rng.hpp"
#include "lgm/samplers.hpp"

using namespace lgm;
namespace fs = std::filesystem;

namespace {

void report(int criterion, bool ok, const std::string& what) {
  std::printf("[criterion %2d] %s: %s\n", criterion, ok ? "PASS" : "FAIL",
              what.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(ok, "criterion ", criterion, ": ", what);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Numerical-conjugate posterior for the bivariate example: beta | tau is
// Gaussian in closed form, tau is integrated on a fine log-precision grid
// using the same priors the fitter applies (fixed-effect precision 1e-3,
// conditioning-parameter precision 1e-6, Gamma(1, 5e-5) on tau).
struct BivariateOracle {
  std::vector<double> node_weight;
  std::vector<Vector> node_mean;   // (b0, b1, b2)
  std::vector<Vector> node_sd;

  explicit BivariateOracle(const Dataset& data) {
    const int n = data.n_rows();
    Matrix X(n, 3);
    X.col(0).setOnes();
    X.col(1) = data.col("x1");
    X.col(2) = data.col("x2");
    const Vector y = data.col("y");
    Matrix P = Matrix::Zero(3, 3);
    P(0, 0) = 1e-3;
    P(1, 1) = P(2, 2) = 1e-6;
    const Matrix XtX = X.transpose() * X;
    const Vector Xty = X.transpose() * y;
    const double yty = y.squaredNorm();

    std::vector<double> logw;
    const int G = 1201;
    for (int g = 0; g < G; ++g) {
      const double theta = -3.0 + 6.0 * g / (G - 1);
      const double tau = std::exp(theta);
      const Matrix Q = P + tau * XtX;
      const Vector m = Q.ldlt().solve(tau * Xty);
      const double log_ev =
          0.5 * std::log(P.determinant()) - 0.5 * std::log(Q.determinant()) +
          0.5 * n * (theta - std::log(2.0 * M_PI)) -
          0.5 * (tau * yty - m.dot(Q * m));
      // Gamma(1, b) prior on tau with the log-scale Jacobian.
      const double log_prior = std::log(5e-5) - 5e-5 * tau + theta;
      logw.push_back(log_ev + log_prior);
      node_mean.push_back(m);
      Vector sd(3);
      const Matrix cov = Q.inverse();
      for (int k = 0; k < 3; ++k) sd[k] = std::sqrt(cov(k, k));
      node_sd.push_back(sd);
    }
    double mx = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (double lw : logw) total += std::exp(lw - mx);
    for (double lw : logw) node_weight.push_back(std::exp(lw - mx) / total);
  }

  double mean(int k) const {
    double m = 0.0;
    for (size_t g = 0; g < node_weight.size(); ++g)
      m += node_weight[g] * node_mean[g][k];
    return m;
  }
  double cdf(int k, double t) const {
    double c = 0.0;
    for (size_t g = 0; g < node_weight.size(); ++g)
      c += node_weight[g] *
           normal_cdf((t - node_mean[g][k]) / node_sd[g][k]);
    return c;
  }
};

// Weighted posterior mean of z component k plus its self-normalized IS
// standard error.
std::pair<double, double> weighted_mean_se(
    const std::vector<WeightedSample>& samples, const Vector& w, int k) {
  double mean = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) mean += w[i] * samples[i].z[k];
  double v = 0.0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double d = w[i] * (samples[i].z[k] - mean);
    v += d * d;
  }
  return {mean, std::sqrt(v)};
}

// Kolmogorov distance between the weighted ECDF of slope k (1-based in the
// joint coefficient vector) and the oracle's marginal CDF.
double ks_distance(const std::vector<WeightedSample>& samples, const Vector& w,
                   int k, const BivariateOracle& oracle) {
  std::vector<std::pair<double, double>> zw;
  for (size_t i = 0; i < samples.size(); ++i)
    zw.emplace_back(samples[i].z[k - 1], w[i]);
  std::sort(zw.begin(), zw.end());
  double cum = 0.0, sup = 0.0;
  for (const auto& [z, wi] : zw) {
    const double ref = oracle.cdf(k, z);
    sup = std::max(sup, std::abs(cum - ref));
    cum += wi;
    sup = std::max(sup, std::abs(cum - ref));
  }
  return sup;
}

ConditionalModel random_gaussian_model(int n, int k, std::uint64_t seed) {
  RngStream rng(seed, 0, 0);
  ConditionalModel m;
  m.y = Vector(n);
  m.Z = Matrix(n, k);
  m.Z.col(0).setOnes();
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j < k; ++j) m.Z(i, j) = rng.next_normal();
    m.y[i] = 1.5 * rng.next_normal() - 0.3;
  }
  m.beta_names.resize(k);
  for (int j = 0; j < k; ++j) m.beta_names[j] = "b" + std::to_string(j);
  return m;
}

double weighted_quantile(std::vector<std::pair<double, double>> zw, double p) {
  std::sort(zw.begin(), zw.end());
  double cum = 0.0;
  for (const auto& [z, w] : zw) {
    cum += w;
    if (cum >= p) return z;
  }
  return zw.back().first;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("criterion 1: Laplace evidence is exact for Gaussian models") {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  RngStream pick(2024, 0, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 5 + static_cast<int>(pick.next_u64() % 46);
    const int k = 1 + static_cast<int>(pick.next_u64() % 4);
    const ConditionalModel m = random_gaussian_model(n, k, 500 + trial);
    const double theta = 2.0 * (pick.next_uniform() - 0.5);
    const double lap = conditional_log_evidence(m, ThetaGrid::single(theta));
    const double exact = exact_gaussian_evidence(m, theta);
    if (!(std::abs(lap - exact) / std::abs(exact) < 1e-8)) ok = false;
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  report(1, ok && secs < 5.0,
         "25 randomized Gaussian models, relative evidence error < 1e-8");
}

TEST_CASE("criterion 2: bivariate reproduction against the conjugate oracle") {
  const Dataset data = simulate_dataset("bivariate", 1234, 100);
  const BivariateOracle oracle(data);
  const ModelSetup setup = bivariate_linear_adapter(data);
  const auto t0 = std::chrono::steady_clock::now();

  bool ok = true;
  std::string detail;
  for (int method = 0; method < 2; ++method) {
    SamplerConfig cfg;
    cfg.seed = 101;
    cfg.workers = 4;
    WeightedSampleSet set;
    if (method == 0) {
      cfg.N0 = 800;
      cfg.N = 2000;
      set = run_is(setup.target, setup.g0, cfg);
    } else {
      cfg.schedule.assign(8, 250);
      set = run_amis(setup.target, setup.g0, cfg);
    }
    const Vector w = set.normalized_weights();
    for (int k = 1; k <= 2; ++k) {
      const auto [mean, se] = weighted_mean_se(set.samples, w, k - 1);
      if (std::abs(mean - oracle.mean(k)) > 3.0 * se) ok = false;
      if (ks_distance(set.samples, w, k, oracle) >= 0.05) ok = false;
    }
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  report(2, ok && secs < 120.0,
         "IS and AMIS posterior means within 3 MC se and KS < 0.05");
}

TEST_CASE("criterion 3: single-round adaptive run equals plain IS") {
  const Dataset data = simulate_dataset("bivariate", 5, 40);
  const ModelSetup setup = bivariate_linear_adapter(data);
  SamplerConfig cfg;
  cfg.schedule = {200};
  cfg.seed = 31;
  const WeightedSampleSet amis = run_amis(setup.target, setup.g0, cfg);
  int failed = 0;
  const auto plain =
      sample_batch(setup.target, setup.g0, 0, 200, 31, cfg.fitter, 1, &failed);
  std::vector<double> lw;
  for (const auto& s : plain)
    lw.push_back(s.log_evidence + s.log_prior -
                 log_proposal_density(setup.g0, s.z));
  const Vector w_plain = normalize_log_weights(lw);
  const Vector w_amis = amis.normalized_weights();
  bool ok = w_amis.size() == w_plain.size();
  for (int i = 0; ok && i < w_amis.size(); ++i)
    if (std::abs(w_amis[i] - w_plain[i]) > 1e-12) ok = false;
  report(3, ok, "T = 0 adaptive weights match plain IS to 1e-12");
}

TEST_CASE("criterion 4: incremental mixture weights match a from-scratch pass") {
  const Dataset data = simulate_dataset("bivariate", 6, 40);
  const ModelSetup setup = bivariate_linear_adapter(data);
  SamplerConfig cfg;
  cfg.schedule.assign(5, 150);
  cfg.seed = 32;
  cfg.workers = 4;
  const WeightedSampleSet set = run_amis(setup.target, setup.g0, cfg);
  double total = 0.0;
  for (int c : set.counts) total += c;
  bool ok = set.proposals.size() == 5;
  for (const auto& s : set.samples) {
    if (s.log_weight == -std::numeric_limits<double>::infinity()) continue;
    double gamma = -std::numeric_limits<double>::infinity();
    for (size_t l = 0; l < set.proposals.size(); ++l) {
      const double term = std::log(static_cast<double>(set.counts[l])) +
                          log_proposal_density(set.proposals[l], s.z);
      const double m = std::max(gamma, term);
      gamma = m + std::log(std::exp(gamma - m) + std::exp(term - m));
    }
    const double scratch =
        s.log_evidence + s.log_prior - (gamma - std::log(total));
    if (std::abs(s.log_weight - scratch) >
        1e-10 * std::max(1.0, std::abs(scratch)))
      ok = false;
  }
  report(4, ok, "five-round mixture weights reproduced from scratch to 1e-10");
}

TEST_CASE("criterion 5: diagnostics identities hold exactly") {
  bool ok = true;
  ok = ok && ess(Vector::Constant(12, 0.7)) == 12.0;
  {
    Vector w(4);
    w << 1, 1, 0, 0;
    ok = ok && ess(w) == 2.0;
  }
  {
    Vector w(6);
    w << 0.05, 0.25, 0.1, 0.3, 0.2, 0.1;
    ok = ok && std::abs(ess(17.0 * w) - ess(w)) < 1e-12;
    Vector h(6);
    h << 1.0, -2.0, 0.5, 3.0, -1.0, 0.25;
    ok = ok && std::abs(ne_h(17.0 * w, h) - ne_h(w, h)) < 1e-12;
    ok = ok && ne_h(w, Vector::Constant(6, 4.0)) <= 6.0 + 1e-12;
  }
  ok = ok && std::abs(ne_h(Vector::Constant(8, 0.125),
                           Vector::Constant(8, 2.0)) -
                      8.0) < 1e-12;
  {
    Vector h(3);
    h << 5.0, 0.0, 0.0;
    ok = ok && std::abs(ne_h(Vector::Constant(3, 1.0), h) - 1.0) < 1e-15;
  }
  report(5, ok, "ESS and n_e(h) trivial identities");
}

TEST_CASE("criterion 6: heavier regularization shrinks the posterior mean") {
  const Dataset data = simulate_dataset("lasso", 11, 80);
  double prev = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (double lambda : {0.1, 1.0, 10.0}) {
    const ModelSetup setup = lasso_adapter(data, lambda);
    SamplerConfig cfg;
    cfg.schedule.assign(8, 250);
    cfg.seed = 41;
    cfg.workers = 4;
    const WeightedSampleSet set = run_amis(setup.target, setup.g0, cfg);
    const Vector w = set.normalized_weights();
    double l1 = 0.0;
    for (int k = 0; k < 5; ++k) {
      double mean = 0.0;
      for (size_t i = 0; i < set.samples.size(); ++i)
        mean += w[i] * set.samples[i].z[k];
      l1 += std::abs(mean);
    }
    if (!(l1 < prev)) ok = false;
    prev = l1;
  }
  report(6, ok, "posterior-mean L1 norm strictly decreasing in lambda");
}

TEST_CASE("criterion 7: quantile curves never cross") {
  RngStream rng(2025, 0, 0);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 5 + static_cast<int>(rng.next_u64() % 40);
    Vector x(m), f(m);
    for (int i = 0; i < m; ++i) {
      x[i] = 10.0 * (rng.next_uniform() - 0.5);
      f[i] = 3.0 * rng.next_normal();
    }
    const double alpha = 5.0 * rng.next_normal();
    const double beta = 3.0 * rng.next_normal();
    const double mu0 = rng.next_normal();
    double p1 = rng.next_uniform(), p2 = rng.next_uniform();
    if (p1 == p2) continue;
    if (p1 > p2) std::swap(p1, p2);
    const Vector lo = quantile_curve(mu0, f, x, alpha, beta, p1);
    const Vector hi = quantile_curve(mu0, f, x, alpha, beta, p2);
    for (int i = 0; i < m; ++i)
      if (!(lo[i] < hi[i])) ++violations;
  }
  report(7, violations == 0, "1000 random configurations, zero crossings");
}

TEST_CASE("criterion 8: emitted samples are identical for 1, 2 and 8 workers") {
  const fs::path dir = fs::temp_directory_path() / "lgm_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);

  struct Case {
    const char* model;
    const char* method;
    std::map<std::string, std::string> extra;
  };
  const std::vector<Case> cases = {
      {"bivariate", "is", {{"sampler.N0", "60"}, {"sampler.N", "150"}}},
      {"lasso", "amis", {{"sampler.schedule", "80,80,80"}}},
      {"missing", "amis", {{"sampler.schedule", "80,80,80"}}},
      {"quantile", "amis",
       {{"sampler.schedule", "60,60,60"}, {"model.bins", "10"}}},
  };
  bool ok = true;
  for (const auto& c : cases) {
    const auto data = (dir / (std::string(c.model) + ".csv")).string();
    write_csv(simulate_dataset(c.model, 19, c.model == std::string("missing")
                                                ? 25
                                                : 60),
              data);
    std::string reference;
    for (int workers : {1, 2, 8}) {
      std::map<std::string, std::string> kv = {
          {"model", c.model},       {"data", data},
          {"method", c.method},     {"seed", "7"},
          {"workers", std::to_string(workers)},
          {"out", (dir / (std::string(c.model) + "_w" +
                          std::to_string(workers)))
                      .string()}};
      kv.insert(c.extra.begin(), c.extra.end());
      if (run(parse_config(kv)) != EXIT_OK) ok = false;
      const std::string bytes =
          slurp(dir / (std::string(c.model) + "_w" + std::to_string(workers)) /
                "samples.csv");
      if (workers == 1)
        reference = bytes;
      else if (bytes != reference)
        ok = false;
    }
  }
  report(8, ok, "samples.csv byte-identical across worker counts, all models");
}

TEST_CASE("criterion 9: tight initial proposals sink IS but not the adaptive run") {
  const Dataset data = simulate_dataset("lasso", 11, 60);
  const double lambda = 1.0;
  int successes = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ModelSetup setup = lasso_adapter(data, lambda);
    setup.g0.family = ProposalFamily::Gaussian;
    setup.g0.mu = Vector::Zero(5);
    setup.g0.sigma = 1e-2 * Matrix::Identity(5, 5);  // sd 0.1, far too tight

    const int N = 2500;
    bool is_poor = false;
    try {
      SamplerConfig cfg;
      cfg.N0 = 500;
      cfg.N = N;
      cfg.seed = seed;
      cfg.workers = 4;
      const WeightedSampleSet is_set = run_is(setup.target, setup.g0, cfg);
      const Vector w = is_set.normalized_weights();
      double worst = 0.0;
      for (int k = 0; k < 5; ++k) {
        Vector h(w.size());
        for (int i = 0; i < w.size(); ++i) h[i] = is_set.samples[i].z[k];
        worst = std::max(worst, ne_h(w, h));
      }
      is_poor = worst < 0.05 * N;
    } catch (const SamplerError&) {
      is_poor = true;  // aborted preliminary adaptation is the failure mode
    }

    SamplerConfig cfg;
    cfg.schedule.assign(12, 250);
    cfg.seed = seed;
    cfg.workers = 4;
    const WeightedSampleSet amis_set = run_amis(setup.target, setup.g0, cfg);
    const Vector w = amis_set.normalized_weights();
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 5; ++k) {
      Vector h(w.size());
      for (int i = 0; i < w.size(); ++i) h[i] = amis_set.samples[i].z[k];
      best = std::min(best, ne_h(w, h));
    }
    const bool amis_good = best > 0.2 * N;
    if (is_poor && amis_good) ++successes;
  }
  report(9, successes >= 8,
         "IS n_e < 5% of N while adaptive n_e > 20% of N in " +
             std::to_string(successes) + "/10 seeds");
}

TEST_CASE("criterion 10: imputation intervals cover the truth") {
  int covered = 0, total = 0;
  for (std::uint64_t rep = 1; rep <= 20; ++rep) {
    const Dataset data = simulate_dataset("missing", rep, 25);
    const Vector truth = missing_true_values(rep, 25);
    const ModelSetup setup = missing_covariate_adapter(data);
    SamplerConfig cfg;
    cfg.schedule.assign(6, 250);
    cfg.seed = 1000 + rep;
    cfg.workers = 4;
    const WeightedSampleSet set = run_amis(setup.target, setup.g0, cfg);
    const Vector w = set.normalized_weights();
    const int m = static_cast<int>(truth.size());
    for (int k = 0; k < m; ++k) {
      std::vector<std::pair<double, double>> zw;
      for (size_t i = 0; i < set.samples.size(); ++i)
        zw.emplace_back(set.samples[i].z[k], w[i]);
      const double lo = weighted_quantile(zw, 0.025);
      const double hi = weighted_quantile(zw, 0.975);
      ++total;
      if (truth[k] >= lo && truth[k] <= hi) ++covered;
    }
  }
  const double rate = static_cast<double>(covered) / total;
  char buf[96];
  std::snprintf(buf, sizeof buf,
                "central 95%% interval coverage %.3f over 20 replications",
                rate);
  report(10, rate >= 0.85 && rate <= 1.0, buf);
}
