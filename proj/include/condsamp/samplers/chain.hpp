#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/rng.hpp"

namespace condsamp {

/// Provenance tag for imputations generated independently of every chain latent.
inline constexpr std::uint64_t kIndependentEpoch = std::numeric_limits<std::uint64_t>::max();

/// State of one MCMC chain.
///
/// `epoch` counts accepted latent moves; every imputation generated while the
/// chain sits at a given z carries that z's epoch.
struct ChainState {
  Vector z;
  Vector x_mis;
  std::size_t t = 0;
  std::size_t accept_count = 0;
  std::size_t degenerate_count = 0;
  std::uint64_t epoch = 0;
  bool diverged = false;

  // cached terms for the current z; NaN means "not computed yet"
  double log_target = std::numeric_limits<double>::quiet_NaN();  // log p(x_obs | z) + log p(z) (collapsed samplers)
  double log_joint = std::numeric_limits<double>::quiet_NaN();   // log p(x_obs, x_mis | z) + log p(z) of the last MWG step
  double log_q = std::numeric_limits<double>::quiet_NaN();       // proposal log-density of z from the last step

  void invalidate_cache() {
    log_target = std::numeric_limits<double>::quiet_NaN();
    log_joint = std::numeric_limits<double>::quiet_NaN();
    log_q = std::numeric_limits<double>::quiet_NaN();
  }
};

/// Outcome of a single sampler step.
struct StepInfo {
  bool accepted = true;
  double log_accept_ratio = 0.0;
  bool degenerate = false;
  bool from_prior = false;                      // AC-MWG mixture component indicator
  std::uint64_t history_epoch = kIndependentEpoch;  // provenance of the re-sampled imputation (AC-MWG)
};

/// One imputation in the AC-MWG history, tagged with the epoch of the z that produced it.
struct HistoryEntry {
  Vector x_mis;
  std::uint64_t epoch = kIndependentEpoch;
};

/// Imputation history for adaptive collapsed MWG.
///
/// Proposals re-sample only from `accepted`. Imputations produced under the
/// current latent wait in `pending` until that latent is replaced.
class AcMwgHistory {
 public:
  AcMwgHistory() = default;
  explicit AcMwgHistory(std::size_t window) : window_(window) {}

  [[nodiscard]] const std::vector<HistoryEntry>& accepted() const { return accepted_; }
  [[nodiscard]] const std::vector<HistoryEntry>& pending() const { return pending_; }
  [[nodiscard]] std::size_t window() const { return window_; }
  [[nodiscard]] bool empty() const { return accepted_.empty(); }

  void seed(Vector x_mis, std::uint64_t epoch = kIndependentEpoch) { accepted_.push_back({std::move(x_mis), epoch}); }
  void add_pending(Vector x_mis, std::uint64_t epoch) { pending_.push_back({std::move(x_mis), epoch}); }

  void flush() {
    for (auto& e : pending_) accepted_.push_back(std::move(e));
    pending_.clear();
  }

  /// Uniform draw from the accepted history (or its last `window` entries).
  [[nodiscard]] const HistoryEntry& draw(Rng& rng) const {
    if (accepted_.empty()) throw UsageError("AC-MWG history is empty");
    const std::size_t n = accepted_.size();
    const std::size_t span = (window_ == 0 || window_ >= n) ? n : window_;
    return accepted_[n - span + rng.index(span)];
  }

 private:
  std::size_t window_ = 0;  // 0 = full history
  std::vector<HistoryEntry> accepted_;
  std::vector<HistoryEntry> pending_;
};

/// Optional per-coordinate clamp for pseudo-Gibbs imputations.
struct ClipBounds {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

struct ChainRecord {
  std::size_t t = 0;
  bool accepted = true;
  double log_accept_ratio = 0.0;
  Vector z;
  Vector x_mis;
};

struct ChainTrace {
  std::vector<ChainRecord> records;
  std::size_t thin = 1;
  std::size_t burn_in = 0;
  std::size_t steps = 0;
  std::size_t accept_count = 0;
  std::size_t degenerate_count = 0;
  std::size_t prior_proposals = 0;
  bool diverged = false;
  std::size_t diverged_at = 0;

  [[nodiscard]] double acceptance_rate() const {
    return steps == 0 ? 0.0 : static_cast<double>(accept_count) / static_cast<double>(steps);
  }

  /// Records with t > burn_in.
  [[nodiscard]] std::vector<const ChainRecord*> post_burn_in() const {
    std::vector<const ChainRecord*> out;
    for (const auto& r : records)
      if (r.t > burn_in) out.push_back(&r);
    return out;
  }
};

}  // namespace condsamp
