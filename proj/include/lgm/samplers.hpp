#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lgm/fitter.hpp"
#include "lgm/proposal.hpp"

namespace lgm {

// One draw of the conditioning parameters with its conditional fit.
struct WeightedSample {
  Vector z;
  int round = 0;
  int index = 0;
  double log_evidence = 0.0;
  double log_prior = 0.0;
  double log_gamma = 0.0;  // log of the running mixture numerator
  double log_weight = 0.0;
  bool fit_ok = true;
  FitResult fit;
};

enum class Method { IS, AMIS, MH };

struct SamplerConfig {
  Method method = Method::IS;
  int N0 = 800;             // preliminary sample count (IS)
  int N = 10000;            // main sample count (IS/MH)
  std::vector<int> schedule;  // AMIS per-round counts; empty = default
  std::uint64_t seed = 0;
  int workers = 1;
  Matrix mh_step_sigma;     // scale of the MH random walk
  FitterOptions fitter;
};

// 28 rounds totalling 10000, each between 250 and 500.
std::vector<int> default_amis_schedule();

// The sampler's view of a model: a prior over the conditioning parameters and
// a builder mapping a conditioning point to a fittable conditional model.
struct TargetAdapter {
  std::vector<std::string> z_names;
  std::function<double(const Vector&)> log_prior;
  std::function<ConditionalModel(const Vector&)> build_model;
  // Test hook: bypasses the fitter when set.
  std::function<FitResult(const Vector&)> fit_override;
};

struct WeightedSampleSet {
  std::vector<WeightedSample> samples;
  std::vector<ProposalParams> proposals;  // lambda_0 .. lambda_T
  std::vector<int> counts;                // draws per round
  int n_failed_fits = 0;
  double runtime_seconds = 0.0;
  std::vector<std::string> warnings;

  Vector normalized_weights() const;
};

struct SampleChain {
  std::vector<WeightedSample> states;  // post burn-in, uniform weights
  int burn_in = 0;
  double acceptance_rate = 0.0;
  int n_failed_fits = 0;
  double runtime_seconds = 0.0;
};

// Self-normalized weights from log weights: max-shifted exponentiation,
// -inf maps to exactly zero. Throws if no weight is finite.
Vector normalize_log_weights(const std::vector<double>& log_weights);

// Draw and fit one batch from proposal g. Sample j uses the (round, j)
// substream of the master seed, so output is independent of worker count.
std::vector<WeightedSample> sample_batch(const TargetAdapter& target,
                                         const ProposalParams& g, int round,
                                         int n, std::uint64_t seed,
                                         const FitterOptions& opts,
                                         int workers, int* n_failed_fits);

// Serial reference for the batch kernel; sample_batch with workers > 1 must
// produce identical output.
std::vector<WeightedSample> sample_batch_serial(const TargetAdapter& target,
                                                const ProposalParams& g,
                                                int round, int n,
                                                std::uint64_t seed,
                                                const FitterOptions& opts,
                                                int* n_failed_fits);

WeightedSampleSet run_is(const TargetAdapter& target, const ProposalParams& g0,
                         const SamplerConfig& cfg);

WeightedSampleSet run_amis(const TargetAdapter& target,
                           const ProposalParams& g0, const SamplerConfig& cfg);

SampleChain run_mh(const TargetAdapter& target, const SamplerConfig& cfg,
                   const Vector& z0);

}  // namespace lgm
