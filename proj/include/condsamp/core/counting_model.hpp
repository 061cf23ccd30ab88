#pragma once

#include <array>
#include <cstddef>
#include <cstring>
#include <list>
#include <string>
#include <unordered_map>

#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"

namespace condsamp {

enum class EvalPhase : std::size_t { kInit = 0, kSampling = 1, kFinalize = 2 };

struct EvalCounts {
  std::size_t decoder_passes = 0;  // distinct decoder evaluations (recent latents are cached)
  std::size_t decoder_log_lik_calls = 0;
  std::size_t decoder_samples = 0;
  std::size_t encoder_calls = 0;
  std::size_t prior_evals = 0;

  EvalCounts& operator+=(const EvalCounts& o) {
    decoder_passes += o.decoder_passes;
    decoder_log_lik_calls += o.decoder_log_lik_calls;
    decoder_samples += o.decoder_samples;
    encoder_calls += o.encoder_calls;
    prior_evals += o.prior_evals;
    return *this;
  }
};

/// Model wrapper that counts evaluations per phase.
///
/// A decoder pass is charged only when the latent differs bitwise from the
/// most recent `cache_size` latents the decoder has seen, since the decoder
/// output at a given z serves both likelihood evaluation and sampling.
/// Not thread-safe: one instance per job.
template <LatentModel M>
class CountingModel {
 public:
  explicit CountingModel(const M& model, std::size_t cache_size = 256) : model_(&model), cache_size_(cache_size) {}

  [[nodiscard]] const M& inner() const { return *model_; }
  void set_phase(EvalPhase p) { phase_ = p; }
  [[nodiscard]] EvalPhase phase() const { return phase_; }
  [[nodiscard]] const EvalCounts& counts(EvalPhase p) const { return counts_[static_cast<std::size_t>(p)]; }
  [[nodiscard]] EvalCounts total() const {
    EvalCounts t;
    for (const auto& c : counts_) t += c;
    return t;
  }

  [[nodiscard]] std::size_t latent_dim() const { return model_->latent_dim(); }
  [[nodiscard]] std::size_t data_dim() const { return model_->data_dim(); }
  [[nodiscard]] Capabilities capabilities() const { return model_->capabilities(); }

  [[nodiscard]] double log_prior(const Vector& z) const {
    ++cur().prior_evals;
    return model_->log_prior(z);
  }
  [[nodiscard]] Vector sample_prior(Rng& rng) const { return model_->sample_prior(rng); }

  [[nodiscard]] double decoder_log_lik(const Vector& x, const MaskedPoint& p, const Vector& z, Scope s) const {
    ++cur().decoder_log_lik_calls;
    touch(z);
    return model_->decoder_log_lik(x, p, z, s);
  }

  [[nodiscard]] Vector sample_decoder_conditional(const MaskedPoint& p, const Vector& z, Rng& rng) const {
    ++cur().decoder_samples;
    touch(z);
    return model_->sample_decoder_conditional(p, z, rng);
  }

  [[nodiscard]] EncoderOf<M> encoder(const Vector& x) const {
    ++cur().encoder_calls;
    return model_->encoder(x);
  }

  [[nodiscard]] auto exact_posterior(const MaskedPoint& p) const
    requires ExactPosteriorModel<M>
  {
    return model_->exact_posterior(p);
  }
  [[nodiscard]] double log_marginal_observed(const MaskedPoint& p) const
    requires ExactPosteriorModel<M>
  {
    return model_->log_marginal_observed(p);
  }

 private:
  EvalCounts& cur() const { return counts_[static_cast<std::size_t>(phase_)]; }

  void touch(const Vector& z) const {
    std::string key(reinterpret_cast<const char*>(z.data()), static_cast<std::size_t>(z.size()) * sizeof(double));
    if (auto it = index_.find(key); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return;
    }
    ++cur().decoder_passes;
    if (cache_size_ == 0) return;
    lru_.push_front(key);
    index_.emplace(std::move(key), lru_.begin());
    if (lru_.size() > cache_size_) {
      index_.erase(lru_.back());
      lru_.pop_back();
    }
  }

  const M* model_;
  std::size_t cache_size_;
  EvalPhase phase_ = EvalPhase::kSampling;
  mutable std::array<EvalCounts, 3> counts_{};
  mutable std::list<std::string> lru_;
  mutable std::unordered_map<std::string, std::list<std::string>::iterator> index_;
};

}  // namespace condsamp
