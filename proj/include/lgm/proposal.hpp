#pragma once

#include "lgm/gmrf.hpp"
#include "lgm/rng.hpp"

namespace lgm {

enum class ProposalFamily { Gaussian, StudentT };

// Location/scale family of the sampling distribution over the conditioning
// parameters. For Student-t with nu > 2 the covariance is nu/(nu-2) * sigma.
struct ProposalParams {
  ProposalFamily family = ProposalFamily::Gaussian;
  double nu = 3.0;     // Student-t only
  Vector mu;
  Matrix sigma;        // SPD scale matrix

  int dim() const { return static_cast<int>(mu.size()); }
};

Vector sample_proposal(const ProposalParams& p, RngStream& rng);

double log_proposal_density(const ProposalParams& p, const Vector& z);

// Weighted moment matching: location = weighted mean, scale = weighted
// covariance, with an eigenvalue floor so the result stays SPD even when few
// samples carry weight. Family and nu are carried over from `current`.
ProposalParams adapt_moments(const std::vector<Vector>& z,
                             const std::vector<double>& log_weights,
                             const ProposalParams& current);

}  // namespace lgm
