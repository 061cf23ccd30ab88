#pragma once

#include <cstddef>
#include <optional>

#include "condsamp/core/error.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"
#include "condsamp/lair/lair.hpp"
#include "condsamp/samplers/chain.hpp"
#include "condsamp/samplers/pseudo_gibbs.hpp"

namespace condsamp {

struct InitStrategy {
  enum class Kind { kMarginal, kFixed, kPseudoGibbsWarmup, kLairWarmup };
  Kind kind = Kind::kMarginal;
  std::size_t n = 0;  // warmup length
  std::size_t K = 4;  // LAIR warmup particles
  std::size_t R = 1;
  Vector z;           // fixed latent

  static InitStrategy marginal() { return {}; }
  static InitStrategy fixed(Vector z) { return {Kind::kFixed, 0, 0, 0, std::move(z)}; }
  static InitStrategy pseudo_gibbs_warmup(std::size_t n) { return {Kind::kPseudoGibbsWarmup, n, 0, 0, {}}; }
  static InitStrategy lair_warmup(std::size_t n, std::size_t K, std::size_t R) {
    return {Kind::kLairWarmup, n, K, R, {}};
  }

  void validate() const {
    if ((kind == Kind::kPseudoGibbsWarmup || kind == Kind::kLairWarmup) && n < 1)
      throw ConfigError("warmup initialisation needs n >= 1");
    if (kind == Kind::kLairWarmup && K < 1) throw ConfigError("LAIR warmup needs K >= 1");
  }
};

/// Initial chain state; t, accept_count and caches start fresh.
template <LatentModel M>
ChainState initial_state(const M& model, const MaskedPoint& point, const InitStrategy& init, Rng& rng) {
  init.validate();
  point.require_conditional_task();
  ChainState s;
  switch (init.kind) {
    case InitStrategy::Kind::kMarginal:
      s.z = model.sample_prior(rng);
      s.x_mis = model.sample_decoder_conditional(point, s.z, rng);
      break;
    case InitStrategy::Kind::kFixed:
      if (static_cast<std::size_t>(init.z.size()) != model.latent_dim())
        throw ConfigError("fixed initial latent has the wrong dimension");
      s.z = init.z;
      s.x_mis = model.sample_decoder_conditional(point, s.z, rng);
      break;
    case InitStrategy::Kind::kPseudoGibbsWarmup: {
      s.z = model.sample_prior(rng);
      s.x_mis = model.sample_decoder_conditional(point, s.z, rng);
      for (std::size_t i = 0; i < init.n && !s.diverged; ++i) pseudo_gibbs_step(model, point, s, rng);
      if (s.diverged) throw DegenerateError("pseudo-Gibbs warmup produced a non-finite imputation");
      break;
    }
    case InitStrategy::Kind::kLairWarmup: {
      ParticleSet ps = lair_init(model, point, init.K, init.R, rng);
      for (std::size_t i = 0; i < init.n; ++i) lair_iteration(model, point, ps, rng);
      s.z = ps.z.front();
      s.x_mis = ps.x_mis.front();
      break;
    }
  }
  ChainState fresh;
  fresh.z = std::move(s.z);
  fresh.x_mis = std::move(s.x_mis);
  return fresh;
}

/// H^0 for AC-MWG: one imputation decoded from a fresh prior latent that is
/// then discarded, so it is independent of the chain's initial z.
template <LatentModel M>
AcMwgHistory initial_history(const M& model, const MaskedPoint& point, Rng& rng, std::size_t window = 0) {
  AcMwgHistory h(window);
  const Vector z = model.sample_prior(rng);
  h.seed(model.sample_decoder_conditional(point, z, rng), kIndependentEpoch);
  return h;
}

}  // namespace condsamp
