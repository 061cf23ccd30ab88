#pragma once

#include <cmath>
#include <limits>

#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"
#include "condsamp/samplers/chain.hpp"

namespace condsamp {

namespace detail {

/// Metropolis decision from numerator and denominator log terms.
/// Draws exactly one uniform regardless of the outcome.
inline StepInfo mh_decide(double log_num, double log_den, Rng& rng) {
  const double log_u = std::log(rng.uniform());
  StepInfo info;
  if (log_num == kNegInf && log_den == kNegInf) {
    info.accepted = false;
    info.degenerate = true;
    info.log_accept_ratio = kNegInf;
    return info;
  }
  const double r = log_num - log_den;
  if (std::isnan(r)) {
    info.accepted = false;
    info.degenerate = true;
    info.log_accept_ratio = kNegInf;
    return info;
  }
  info.log_accept_ratio = r;
  info.accepted = log_u < r;
  return info;
}

}  // namespace detail

namespace detail {

template <LatentModel M>
StepInfo mwg_update(const M& model, const MaskedPoint& point, ChainState& state, const Vector& x_full,
                    const EncoderOf<M>& enc, const Vector& z_prop, Rng& rng) {
  const double lp_prop = model.log_prior(z_prop);
  const double lp_cur = model.log_prior(state.z);
  const double num_joint =
      lp_prop == kNegInf ? kNegInf : model.decoder_log_lik(x_full, point, z_prop, Scope::kAllCoords) + lp_prop;
  const double den_joint =
      lp_cur == kNegInf ? kNegInf : model.decoder_log_lik(x_full, point, state.z, Scope::kAllCoords) + lp_cur;
  const double lq_prop = enc.log_density(z_prop);
  const double lq_cur = enc.log_density(state.z);

  StepInfo info = detail::mh_decide(num_joint + lq_cur, den_joint + lq_prop, rng);
  ++state.t;
  if (info.degenerate) ++state.degenerate_count;
  if (info.accepted) {
    state.z = z_prop;
    ++state.accept_count;
    ++state.epoch;
    state.log_joint = num_joint;
    state.log_q = lq_prop;
  } else {
    state.log_joint = den_joint;
    state.log_q = lq_cur;
  }
  state.log_target = std::numeric_limits<double>::quiet_NaN();
  state.x_mis = model.sample_decoder_conditional(point, state.z, rng);
  return info;
}

}  // namespace detail

/// MWG step with a caller-supplied proposal z_prop in place of an encoder draw.
template <LatentModel M>
StepInfo mwg_step_with_proposal(const M& model, const MaskedPoint& point, ChainState& state, const Vector& z_prop,
                                Rng& rng) {
  const Vector x_full = point.merge(state.x_mis);
  return detail::mwg_update(model, point, state, x_full, model.encoder(x_full), z_prop, rng);
}

/// Metropolis-within-Gibbs: z proposed from the encoder at (x_obs, x_mis^{t-1})
/// and corrected towards p(z | x_obs, x_mis^{t-1}); then x_mis refreshed from the decoder.
template <LatentModel M>
StepInfo mwg_step(const M& model, const MaskedPoint& point, ChainState& state, Rng& rng) {
  const Vector x_full = point.merge(state.x_mis);
  const auto enc = model.encoder(x_full);
  const Vector z_prop = enc.sample(rng);
  return detail::mwg_update(model, point, state, x_full, enc, z_prop, rng);
}

}  // namespace condsamp
