#include "lgm/samplers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lgm/errors.hpp"

namespace lgm {

namespace {

constexpr double NEG_INF = -std::numeric_limits<double>::infinity();

double logaddexp(double a, double b) {
  if (a == NEG_INF) return b;
  if (b == NEG_INF) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

WeightedSample draw_one(const TargetAdapter& target, const ProposalParams& g,
                        int round, int j, std::uint64_t seed,
                        const FitterOptions& opts, bool* failed) {
  WeightedSample s;
  s.round = round;
  s.index = j;
  RngStream rng(seed, static_cast<std::uint64_t>(round),
                static_cast<std::uint64_t>(j));
  s.z = sample_proposal(g, rng);
  s.log_prior = target.log_prior(s.z);
  *failed = false;
  if (s.log_prior == NEG_INF) {
    // Out of prior support; skip the conditional fit entirely.
    s.log_evidence = NEG_INF;
    return s;
  }
  try {
    s.fit = target.fit_override ? target.fit_override(s.z)
                                : fit(target.build_model(s.z), opts);
    s.log_evidence = s.fit.log_evidence;
  } catch (const FitError&) {
    s.log_evidence = NEG_INF;
    s.fit_ok = false;
    *failed = true;
  }
  return s;
}

}  // namespace

std::vector<int> default_amis_schedule() {
  std::vector<int> sched(4, 250);
  sched.insert(sched.end(), 24, 375);
  return sched;  // 4*250 + 24*375 = 10000
}

Vector normalize_log_weights(const std::vector<double>& log_weights) {
  const int n = static_cast<int>(log_weights.size());
  double m = NEG_INF;
  for (double lw : log_weights) m = std::max(m, lw);
  if (!std::isfinite(m))
    throw SamplerError("normalize_log_weights: no finite log weight");
  Vector w(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    w[i] = log_weights[i] == NEG_INF ? 0.0 : std::exp(log_weights[i] - m);
    total += w[i];
  }
  return w / total;
}

Vector WeightedSampleSet::normalized_weights() const {
  std::vector<double> lw(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) lw[i] = samples[i].log_weight;
  return normalize_log_weights(lw);
}

std::vector<WeightedSample> sample_batch_serial(const TargetAdapter& target,
                                                const ProposalParams& g,
                                                int round, int n,
                                                std::uint64_t seed,
                                                const FitterOptions& opts,
                                                int* n_failed_fits) {
  std::vector<WeightedSample> out(n);
  int failed = 0;
  for (int j = 0; j < n; ++j) {
    bool f = false;
    out[j] = draw_one(target, g, round, j, seed, opts, &f);
    failed += f ? 1 : 0;
  }
  if (n_failed_fits) *n_failed_fits += failed;
  return out;
}

std::vector<WeightedSample> sample_batch(const TargetAdapter& target,
                                         const ProposalParams& g, int round,
                                         int n, std::uint64_t seed,
                                         const FitterOptions& opts,
                                         int workers, int* n_failed_fits) {
  if (workers <= 1)
    return sample_batch_serial(target, g, round, n, seed, opts, n_failed_fits);
  std::vector<WeightedSample> out(n);
  int failed = 0;
#pragma omp parallel for schedule(dynamic) num_threads(workers) \
    reduction(+ : failed)
  for (int j = 0; j < n; ++j) {
    bool f = false;
    out[j] = draw_one(target, g, round, j, seed, opts, &f);
    failed += f ? 1 : 0;
  }
  if (n_failed_fits) *n_failed_fits += failed;
  return out;
}

WeightedSampleSet run_is(const TargetAdapter& target, const ProposalParams& g0,
                         const SamplerConfig& cfg) {
  const auto t0 = Clock::now();
  WeightedSampleSet set;

  // Preliminary phase: locate the target, then discard the draws.
  std::vector<WeightedSample> pre = sample_batch(
      target, g0, 0, cfg.N0, cfg.seed, cfg.fitter, cfg.workers,
      &set.n_failed_fits);
  std::vector<Vector> zs;
  std::vector<double> lw;
  for (auto& s : pre) {
    zs.push_back(s.z);
    lw.push_back(s.log_evidence + s.log_prior - log_proposal_density(g0, s.z));
  }
  ProposalParams g1;
  try {
    g1 = adapt_moments(zs, lw, g0);
  } catch (const SamplerError& e) {
    throw SamplerError(std::string("run_is: preliminary adaptation failed (") +
                       e.what() + "); the initial proposal is too far from "
                       "the target");
  }

  set.samples = sample_batch(target, g1, 1, cfg.N, cfg.seed, cfg.fitter,
                             cfg.workers, &set.n_failed_fits);
  for (auto& s : set.samples) {
    const double lg = log_proposal_density(g1, s.z);
    s.log_gamma = std::log(static_cast<double>(cfg.N)) + lg;
    s.log_weight = s.log_evidence + s.log_prior - lg;
  }
  set.proposals = {g0, g1};
  set.counts = {cfg.N};
  set.runtime_seconds = seconds_since(t0);
  return set;
}

WeightedSampleSet run_amis(const TargetAdapter& target,
                           const ProposalParams& g0, const SamplerConfig& cfg) {
  const auto t0 = Clock::now();
  const std::vector<int> schedule =
      cfg.schedule.empty() ? default_amis_schedule() : cfg.schedule;
  const int T = static_cast<int>(schedule.size()) - 1;

  WeightedSampleSet set;
  set.proposals = {g0};
  ProposalParams g = g0;
  double total_count = 0.0;

  for (int t = 0; t <= T; ++t) {
    const int Nt = schedule[t];
    std::vector<WeightedSample> batch =
        sample_batch(target, g, t, Nt, cfg.seed, cfg.fitter, cfg.workers,
                     &set.n_failed_fits);
    total_count += Nt;
    set.counts.push_back(Nt);

    // gamma for newborn samples: all proposals used so far, evaluated at z.
    for (auto& s : batch) {
      s.log_gamma = NEG_INF;
      for (int l = 0; l <= t; ++l)
        s.log_gamma = logaddexp(
            s.log_gamma, std::log(static_cast<double>(schedule[l])) +
                             log_proposal_density(set.proposals[l], s.z));
    }

    // Update past samples' gamma with the newest mixture component.
    if (t > 0) {
      const double logNt = std::log(static_cast<double>(Nt));
#pragma omp parallel for schedule(static) num_threads(std::max(1, cfg.workers))
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(set.samples.size());
           ++i) {
        auto& s = set.samples[i];
        s.log_gamma =
            logaddexp(s.log_gamma, logNt + log_proposal_density(g, s.z));
      }
    }

    set.samples.insert(set.samples.end(),
                       std::make_move_iterator(batch.begin()),
                       std::make_move_iterator(batch.end()));

    const double log_total = std::log(total_count);
    for (auto& s : set.samples)
      s.log_weight = s.log_evidence + s.log_prior - (s.log_gamma - log_total);

    if (t < T) {
      std::vector<Vector> zs;
      std::vector<double> lw;
      for (const auto& s : set.samples) {
        zs.push_back(s.z);
        lw.push_back(s.log_weight);
      }
      try {
        g = adapt_moments(zs, lw, g);
      } catch (const SamplerError& e) {
        set.warnings.push_back("round " + std::to_string(t) +
                               ": adaptation failed, keeping proposal (" +
                               e.what() + ")");
      }
      set.proposals.push_back(g);
    }
  }

  set.runtime_seconds = seconds_since(t0);
  return set;
}

SampleChain run_mh(const TargetAdapter& target, const SamplerConfig& cfg,
                   const Vector& z0) {
  const auto t0 = Clock::now();
  if (cfg.mh_step_sigma.rows() != z0.size())
    throw SamplerError("run_mh: step scale does not match z0 dimension");
  Eigen::LLT<Matrix> llt(cfg.mh_step_sigma);
  if (llt.info() != Eigen::Success)
    throw SamplerError("run_mh: step scale is not SPD");
  const Matrix L = llt.matrixL();

  SampleChain chain;
  chain.burn_in = cfg.N / 10;
  const int total_steps = cfg.N + chain.burn_in;
  const int d = static_cast<int>(z0.size());

  auto evaluate = [&](const Vector& z, WeightedSample& s) -> bool {
    s.z = z;
    s.log_prior = target.log_prior(z);
    if (s.log_prior == NEG_INF) return false;
    try {
      s.fit = target.fit_override ? target.fit_override(z)
                                  : fit(target.build_model(z), cfg.fitter);
      s.log_evidence = s.fit.log_evidence;
    } catch (const FitError&) {
      ++chain.n_failed_fits;
      return false;
    }
    return true;
  };

  WeightedSample current;
  if (!evaluate(z0, current))
    throw SamplerError("run_mh: conditional fit failed at the initial state");

  int accepted = 0;
  for (int step = 0; step < total_steps; ++step) {
    RngStream rng(cfg.seed, static_cast<std::uint64_t>(step), 0);
    Vector eps(d);
    for (int i = 0; i < d; ++i) eps[i] = rng.next_normal();
    const Vector proposal = current.z + L * eps;
    const double u = rng.next_uniform();

    WeightedSample cand;
    if (evaluate(proposal, cand)) {
      // Symmetric random walk: the proposal density cancels.
      const double log_ratio = cand.log_evidence + cand.log_prior -
                               current.log_evidence - current.log_prior;
      if (std::log(u) < log_ratio) {
        current = std::move(cand);
        ++accepted;
      }
    }
    if (step >= chain.burn_in) {
      WeightedSample state = current;
      state.round = 0;
      state.index = step - chain.burn_in;
      state.log_weight = -std::log(static_cast<double>(cfg.N));
      chain.states.push_back(std::move(state));
    }
  }
  chain.acceptance_rate = static_cast<double>(accepted) / total_steps;
  chain.runtime_seconds = seconds_since(t0);
  return chain;
}

}  // namespace lgm
