#pragma once

#include <cmath>
#include <string>

#include "condsamp/core/error.hpp"
#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"
#include "condsamp/samplers/chain.hpp"
#include "condsamp/samplers/mwg.hpp"

namespace condsamp {

inline void validate_acmwg_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ConfigError("AC-MWG epsilon must lie in the open interval (0, 1), got " + std::to_string(epsilon));
}

namespace detail {

template <LatentModel M>
double collapsed_log_target(const M& model, const MaskedPoint& point, const Vector& z) {
  const double lp = model.log_prior(z);
  if (lp == kNegInf) return kNegInf;
  return model.decoder_log_lik(point.values(), point, z, Scope::kObservedOnly) + lp;
}

template <LatentModel M>
StepInfo acmwg_update(const M& model, const MaskedPoint& point, ChainState& state, AcMwgHistory& history,
                      const MixtureProposal<M>& prop, const MixtureDraw& draw, std::uint64_t history_epoch, Rng& rng) {
  if (std::isnan(state.log_target)) state.log_target = collapsed_log_target(model, point, state.z);
  const double lt_prop = collapsed_log_target(model, point, draw.z);
  const double lq_prop = prop.log_density(draw.z);
  const double lq_cur = prop.log_density(state.z);

  StepInfo info = mh_decide(lt_prop + lq_cur, state.log_target + lq_prop, rng);
  info.from_prior = draw.from_prior;
  info.history_epoch = history_epoch;
  ++state.t;
  if (info.degenerate) ++state.degenerate_count;
  if (info.accepted) {
    state.z = draw.z;
    state.log_target = lt_prop;
    state.log_q = lq_prop;
    ++state.accept_count;
    ++state.epoch;
    history.flush();
  } else {
    state.log_q = lq_cur;
  }
  state.x_mis = model.sample_decoder_conditional(point, state.z, rng);
  history.add_pending(state.x_mis, state.epoch);
  return info;
}

}  // namespace detail

/// Adaptive collapsed MWG step.
///
/// An imputation is re-sampled from the accepted history, the prior-encoder
/// mixture is built at (x_obs, x~_mis), and an independence Metropolis move
/// targets p(z | x_obs) with x_mis integrated out of the likelihood.
template <LatentModel M>
StepInfo acmwg_step(const M& model, const MaskedPoint& point, ChainState& state, AcMwgHistory& history,
                    double epsilon, Rng& rng) {
  validate_acmwg_epsilon(epsilon);
  if (!model.capabilities().supports_obs_marginal)
    throw CapabilityError("AC-MWG needs the observed-only decoder likelihood");
  const HistoryEntry& entry = history.draw(rng);
  const std::uint64_t tag = entry.epoch;
  const MixtureProposal<M> prop(model, model.encoder(point.merge(entry.x_mis)), epsilon);
  const MixtureDraw draw = prop.draw(rng);
  return detail::acmwg_update(model, point, state, history, prop, draw, tag, rng);
}

/// AC-MWG step with a caller-supplied proposal; the mixture is still built from a history draw.
template <LatentModel M>
StepInfo acmwg_step_with_proposal(const M& model, const MaskedPoint& point, ChainState& state,
                                  AcMwgHistory& history, double epsilon, const Vector& z_prop, Rng& rng) {
  validate_acmwg_epsilon(epsilon);
  const HistoryEntry& entry = history.draw(rng);
  const std::uint64_t tag = entry.epoch;
  const MixtureProposal<M> prop(model, model.encoder(point.merge(entry.x_mis)), epsilon);
  return detail::acmwg_update(model, point, state, history, prop, MixtureDraw{z_prop, false}, tag, rng);
}

}  // namespace condsamp
