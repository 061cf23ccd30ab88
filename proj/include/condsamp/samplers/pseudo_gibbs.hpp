#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"
#include "condsamp/samplers/chain.hpp"

namespace condsamp {

/// z ~ q(z | x_obs, x_mis), then x_mis ~ p(x_mis | x_obs, z), optionally clamped.
///
/// A non-finite imputation sets `state.diverged` and leaves the previous
/// imputation in place; callers stop the chain at that point.
template <LatentModel M>
StepInfo pseudo_gibbs_step(const M& model, const MaskedPoint& point, ChainState& state, Rng& rng,
                           const std::optional<ClipBounds>& clip = std::nullopt) {
  const Vector x_full = point.merge(state.x_mis);
  Vector z = model.encoder(x_full).sample(rng);
  Vector x_mis = model.sample_decoder_conditional(point, z, rng);
  if (clip)
    for (Eigen::Index i = 0; i < x_mis.size(); ++i) x_mis[i] = std::clamp(x_mis[i], clip->lo, clip->hi);
  ++state.t;
  if (!x_mis.allFinite() || !z.allFinite()) {
    state.diverged = true;
    return {false, 0.0, true};
  }
  state.z = std::move(z);
  state.x_mis = std::move(x_mis);
  ++state.accept_count;
  ++state.epoch;
  state.invalidate_cache();
  return {};
}

}  // namespace condsamp
