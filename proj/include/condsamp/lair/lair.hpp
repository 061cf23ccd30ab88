#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"
#include "condsamp/lair/importance.hpp"

namespace condsamp {

struct LairConfig {
  std::size_t K = 19;
  std::size_t R = 1;
  std::size_t T = 2500;
  ResamplingScheme scheme = ResamplingScheme::kMultinomial;
  std::optional<std::size_t> n_out;  // default T * K

  [[nodiscard]] double epsilon() const { return static_cast<double>(R) / static_cast<double>(K + R); }

  void validate() const {
    if (K + R < 1) throw ConfigError("LAIR needs K + R >= 1");
    if (T < 1) throw ConfigError("LAIR needs T >= 1");
    if (n_out && *n_out < 1) throw ConfigError("LAIR n_out must be >= 1");
    if (!n_out && K == 0) throw ConfigError("LAIR with K = 0 needs an explicit n_out");
  }
};

/// K imputation particles with the latents they were decoded from.
struct ParticleSet {
  std::vector<Vector> x_mis;
  std::vector<Vector> z;
  std::size_t R = 0;
  std::size_t t = 0;

  [[nodiscard]] std::size_t K() const { return x_mis.size(); }
};

struct ArchiveEntry {
  std::size_t t = 0;
  std::size_t k = 0;  // component index in [0, K + R); k >= K are prior components
  bool is_prior = false;
  double log_weight = kNegInf;
  Vector z;
};

/// Every proposal of every iteration with its unnormalised DM-MIS log-weight.
class ParticleArchive {
 public:
  [[nodiscard]] const std::vector<ArchiveEntry>& entries() const { return entries_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }
  [[nodiscard]] std::size_t iterations() const { return iteration_log_norm_.size(); }
  [[nodiscard]] const std::vector<double>& iteration_log_norms() const { return iteration_log_norm_; }
  [[nodiscard]] double global_log_norm() const { return global_log_norm_; }

  /// Appends one iteration's proposals; entries must all carry the same t.
  void append(std::vector<ArchiveEntry> slice) {
    std::vector<double> lw;
    lw.reserve(slice.size());
    for (const auto& e : slice) lw.push_back(e.log_weight);
    const double norm = log_sum_exp(lw);
    iteration_log_norm_.push_back(norm);
    global_log_norm_ = log_add_exp(global_log_norm_, norm);
    offsets_.push_back(entries_.size());
    for (auto& e : slice) entries_.push_back(std::move(e));
  }

  [[nodiscard]] std::vector<double> log_weights() const {
    std::vector<double> lw;
    lw.reserve(entries_.size());
    for (const auto& e : entries_) lw.push_back(e.log_weight);
    return lw;
  }

  /// Normalised weights of iteration `i` (0-based).
  [[nodiscard]] std::vector<double> iteration_weights(std::size_t i) const {
    const std::size_t lo = offsets_.at(i);
    const std::size_t hi = i + 1 < offsets_.size() ? offsets_[i + 1] : entries_.size();
    std::vector<double> w;
    for (std::size_t j = lo; j < hi; ++j) w.push_back(std::exp(entries_[j].log_weight - iteration_log_norm_[i]));
    return w;
  }

  /// Weights normalised across all iterations.
  [[nodiscard]] std::vector<double> global_weights() const {
    std::vector<double> w;
    w.reserve(entries_.size());
    for (const auto& e : entries_) w.push_back(std::exp(e.log_weight - global_log_norm_));
    return w;
  }

 private:
  std::vector<ArchiveEntry> entries_;
  std::vector<std::size_t> offsets_;
  std::vector<double> iteration_log_norm_;
  double global_log_norm_ = kNegInf;
};

/// log p(x_obs, z) - log q^t(z), where q^t is the equal-weight mixture of
/// `encoders` and R copies of the prior. With no encoders the prior term is
/// used directly, so the weight is exactly log p(x_obs | z).
template <LatentModel M>
double dm_mis_log_weight(const M& model, const MaskedPoint& point, const Vector& z,
                         const std::vector<EncoderOf<M>>& encoders, std::size_t R) {
  const std::size_t K = encoders.size();
  if (K + R < 1) throw UsageError("dm_mis_log_weight needs at least one mixture component");
  const double lp = model.log_prior(z);
  const double log_joint = lp == kNegInf ? kNegInf : model.decoder_log_lik(point.values(), point, z, Scope::kObservedOnly) + lp;
  if (log_joint == kNegInf) return kNegInf;
  if (K == 0) return log_joint - lp;
  std::vector<double> terms;
  terms.reserve(K + 1);
  for (const auto& q : encoders) terms.push_back(q.log_density(z));
  if (R > 0) terms.push_back(std::log(static_cast<double>(R)) + lp);
  const double log_q = log_sum_exp(terms) - std::log(static_cast<double>(K + R));
  return log_joint - log_q;
}

/// Particles x_mis^(0,k) from independent marginal draws.
template <LatentModel M>
ParticleSet lair_init(const M& model, const MaskedPoint& point, std::size_t K, std::size_t R, Rng& rng) {
  point.require_conditional_task();
  if (!model.capabilities().supports_obs_marginal)
    throw CapabilityError("LAIR needs the observed-only decoder likelihood");
  ParticleSet ps;
  ps.R = R;
  for (std::size_t k = 0; k < K; ++k) {
    Vector z = model.sample_prior(rng);
    ps.x_mis.push_back(model.sample_decoder_conditional(point, z, rng));
    ps.z.push_back(std::move(z));
  }
  return ps;
}

/// One adaptation round: one proposal per mixture component, DM-MIS weights,
/// K particles resampled and re-decoded. Returns the iteration's archive slice.
template <LatentModel M>
std::vector<ArchiveEntry> lair_iteration(const M& model, const MaskedPoint& point, ParticleSet& ps, Rng& rng,
                                         ResamplingScheme scheme = ResamplingScheme::kMultinomial) {
  const std::size_t K = ps.K();
  const std::size_t R = ps.R;
  if (K + R < 1) throw UsageError("LAIR iteration needs K + R >= 1");
  ++ps.t;
  std::vector<EncoderOf<M>> encoders;
  encoders.reserve(K);
  for (std::size_t k = 0; k < K; ++k) encoders.push_back(model.encoder(point.merge(ps.x_mis[k])));

  std::vector<ArchiveEntry> slice(K + R);
  for (std::size_t k = 0; k < K + R; ++k) {
    slice[k].t = ps.t;
    slice[k].k = k;
    slice[k].is_prior = k >= K;
    slice[k].z = k < K ? encoders[k].sample(rng) : model.sample_prior(rng);
  }
  std::vector<double> lw(K + R);
  for (std::size_t k = 0; k < K + R; ++k) lw[k] = slice[k].log_weight = dm_mis_log_weight(model, point, slice[k].z, encoders, R);
  if (log_sum_exp(lw) == kNegInf)
    throw DegenerateError("LAIR iteration " + std::to_string(ps.t) +
                          ": every importance weight is zero; x_obs is likely outside the model's support");
  if (K > 0) {
    const auto idx = resample(lw, K, rng, scheme);
    for (std::size_t k = 0; k < K; ++k) {
      ps.z[k] = slice[idx[k]].z;
      ps.x_mis[k] = model.sample_decoder_conditional(point, ps.z[k], rng);
    }
  }
  return slice;
}

struct LairSample {
  Vector x_mis;
  Vector z;
  std::size_t source_t = 0;
  std::size_t source_k = 0;
};

/// Renormalises the weights across the whole archive, resamples n_out latents
/// and decodes each with fresh decoder noise.
template <LatentModel M>
std::vector<LairSample> lair_finalize(const ParticleArchive& archive, std::size_t n_out, const M& model,
                                      const MaskedPoint& point, Rng& rng,
                                      ResamplingScheme scheme = ResamplingScheme::kMultinomial) {
  if (archive.empty()) throw UsageError("lair_finalize: archive is empty");
  const auto idx = resample(archive.log_weights(), n_out, rng, scheme);
  std::vector<LairSample> out;
  out.reserve(n_out);
  for (std::size_t i : idx) {
    const ArchiveEntry& e = archive.entries()[i];
    out.push_back({model.sample_decoder_conditional(point, e.z, rng), e.z, e.t, e.k});
  }
  return out;
}

struct LairResult {
  ParticleArchive archive;
  ParticleSet particles;
  std::vector<LairSample> samples;
};

/// Full run: initialisation, T iterations, final resampling from the archive.
template <LatentModel M>
LairResult lair_run(const M& model, const MaskedPoint& point, const LairConfig& cfg, Rng& rng) {
  cfg.validate();
  LairResult res;
  res.particles = lair_init(model, point, cfg.K, cfg.R, rng);
  for (std::size_t t = 0; t < cfg.T; ++t) res.archive.append(lair_iteration(model, point, res.particles, rng, cfg.scheme));
  res.samples = lair_finalize(res.archive, cfg.n_out.value_or(cfg.T * cfg.K), model, point, rng, cfg.scheme);
  return res;
}

}  // namespace condsamp
