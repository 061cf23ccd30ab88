#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "condsamp/core/error.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"
#include "condsamp/samplers/acmwg.hpp"
#include "condsamp/samplers/chain.hpp"
#include "condsamp/samplers/init.hpp"
#include "condsamp/samplers/mwg.hpp"
#include "condsamp/samplers/pseudo_gibbs.hpp"

namespace condsamp {

enum class ChainKind { kPseudoGibbs, kMwg, kAcMwg };

struct ChainConfig {
  ChainKind kind = ChainKind::kMwg;
  std::size_t T = 1000;
  double epsilon = 0.05;                // AC-MWG only
  std::optional<ClipBounds> clip;       // pseudo-Gibbs only
  std::size_t thin = 1;
  std::optional<std::size_t> burn_in;   // default T / 10
  std::size_t history_window = 0;       // AC-MWG, 0 = full history
  InitStrategy init;

  [[nodiscard]] std::size_t burn_in_steps() const { return burn_in.value_or(T / 10); }

  void validate() const {
    if (T < 1) throw ConfigError("chain length T must be >= 1");
    if (thin < 1) throw ConfigError("thin must be >= 1");
    if (kind == ChainKind::kAcMwg) validate_acmwg_epsilon(epsilon);
    if (clip && kind != ChainKind::kPseudoGibbs) throw ConfigError("clip bounds apply to pseudo-Gibbs only");
    if (clip && !(clip->hi > clip->lo)) throw ConfigError("clip bounds need hi > lo");
    init.validate();
  }
};

inline const char* chain_kind_name(ChainKind k) {
  switch (k) {
    case ChainKind::kPseudoGibbs: return "pseudo-gibbs";
    case ChainKind::kMwg: return "mwg";
    case ChainKind::kAcMwg: return "ac-mwg";
  }
  return "?";
}

/// Hooks the harness uses to attribute model evaluations to phases.
struct ChainHooks {
  virtual ~ChainHooks() = default;
  virtual void on_init_done() {}
};

/// Runs one chain of T steps after initialisation. Streams: "init" for the
/// initial state, "history" for the AC-MWG seed imputation, "steps" for the chain.
template <LatentModel M>
ChainTrace run_chain(const M& model, const MaskedPoint& point, const ChainConfig& cfg, const Rng& rng,
                     ChainHooks* hooks = nullptr) {
  cfg.validate();
  point.require_conditional_task();
  Rng init_rng = rng.split("init");
  Rng hist_rng = rng.split("history");
  Rng step_rng = rng.split("steps");

  ChainState state = initial_state(model, point, cfg.init, init_rng);
  AcMwgHistory history(cfg.history_window);
  if (cfg.kind == ChainKind::kAcMwg) {
    history = initial_history(model, point, hist_rng, cfg.history_window);
    history.add_pending(state.x_mis, state.epoch);
  }
  if (hooks) hooks->on_init_done();

  ChainTrace trace;
  trace.thin = cfg.thin;
  trace.burn_in = cfg.burn_in_steps();
  trace.records.reserve(cfg.T / cfg.thin + 1);
  for (std::size_t i = 0; i < cfg.T; ++i) {
    StepInfo info;
    switch (cfg.kind) {
      case ChainKind::kPseudoGibbs: info = pseudo_gibbs_step(model, point, state, step_rng, cfg.clip); break;
      case ChainKind::kMwg: info = mwg_step(model, point, state, step_rng); break;
      case ChainKind::kAcMwg: info = acmwg_step(model, point, state, history, cfg.epsilon, step_rng); break;
    }
    ++trace.steps;
    if (info.from_prior) ++trace.prior_proposals;
    if (state.diverged) {
      trace.diverged = true;
      trace.diverged_at = state.t;
      break;
    }
    if (state.t % cfg.thin == 0) trace.records.push_back({state.t, info.accepted, info.log_accept_ratio, state.z, state.x_mis});
  }
  trace.accept_count = state.accept_count;
  trace.degenerate_count = state.degenerate_count;
  return trace;
}

}  // namespace condsamp
