#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"

namespace condsamp {

struct DoeblinBound {
  double log_a = kNegInf;
  [[nodiscard]] double a() const { return std::exp(log_a); }
};

/// min over the given latents of (1-eps) q(z | x_obs, x~) + eps p(z), divided by
/// p(z | x_obs). Latents where the posterior vanishes are skipped.
template <ExactPosteriorModel M>
DoeblinBound doeblin_bound(const M& model, const MaskedPoint& point, const Vector& x_tilde, double epsilon,
                           const std::vector<Vector>& latents) {
  const MixtureProposal<M> prop(model, model.encoder(point.merge(x_tilde)), epsilon);
  const double log_evidence = model.log_marginal_observed(point);
  double worst = INFINITY;
  for (const Vector& z : latents) {
    const double lp = model.log_prior(z);
    if (lp == kNegInf) continue;
    const double log_post = lp + model.decoder_log_lik(point.values(), point, z, Scope::kObservedOnly) - log_evidence;
    if (log_post == kNegInf) continue;
    worst = std::min(worst, prop.log_density(z) - log_post);
  }
  return {worst == INFINITY ? kNegInf : worst};
}

}  // namespace condsamp
