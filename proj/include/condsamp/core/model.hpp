#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <utility>

#include "condsamp/core/error.hpp"
#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/rng.hpp"

namespace condsamp {

/// Which coordinates enter a decoder likelihood evaluation.
enum class Scope { kObservedOnly, kAllCoords };

struct Capabilities {
  bool has_exact_posterior = false;  // p(z | x_obs) available in closed form or by quadrature
  bool supports_obs_marginal = false;  // log p(x_obs | z) is closed form
};

/// Lower bound applied to every decoder standard deviation, in data units.
inline constexpr double kDecoderStdFloor = 1e-6;

/// A proposal distribution over latents that can be sampled and evaluated.
template <class E>
concept LatentDensity = requires(const E& e, const Vector& z, Rng& rng) {
  { e.log_density(z) } -> std::convertible_to<double>;
  { e.sample(rng) } -> std::convertible_to<Vector>;
};

/// The latent-variable model interface consumed by every sampler.
///
/// `decoder_log_lik(x, point, z, scope)` reads data values from `x` (a full
/// data vector) and the mask from `point`; with kObservedOnly only observed
/// coordinates contribute. `encoder(x_full)` returns the amortised q(z | x)
/// for a fully imputed data vector. Models are immutable after construction.
template <class M>
concept LatentModel = requires(const M& m, const MaskedPoint& p, const Vector& v, Rng& rng) {
  { m.latent_dim() } -> std::convertible_to<std::size_t>;
  { m.data_dim() } -> std::convertible_to<std::size_t>;
  { m.capabilities() } -> std::same_as<Capabilities>;
  { m.log_prior(v) } -> std::convertible_to<double>;
  { m.sample_prior(rng) } -> std::convertible_to<Vector>;
  { m.decoder_log_lik(v, p, v, Scope::kAllCoords) } -> std::convertible_to<double>;
  { m.sample_decoder_conditional(p, v, rng) } -> std::convertible_to<Vector>;
  { m.encoder(v) } -> LatentDensity;
};

template <LatentModel M>
using EncoderOf = decltype(std::declval<const M&>().encoder(std::declval<const Vector&>()));

/// Models that can hand out their exact posterior p(z | x_obs).
template <class M>
concept ExactPosteriorModel = LatentModel<M> && requires(const M& m, const MaskedPoint& p) {
  { m.exact_posterior(p) } -> LatentDensity;
  { m.log_marginal_observed(p) } -> std::convertible_to<double>;
};

namespace detail {

inline void check_latent(std::size_t dim, const Vector& z) {
  if (static_cast<std::size_t>(z.size()) != dim)
    throw UsageError("latent has dimension " + std::to_string(z.size()) + ", model expects " + std::to_string(dim));
}

inline void check_data(std::size_t dim, std::size_t got) {
  if (got != dim)
    throw UsageError("data vector has dimension " + std::to_string(got) + ", model expects " + std::to_string(dim));
}

}  // namespace detail

// Checked free-function entry points. Samplers call the model members
// directly on hot paths once dimensions have been validated.

template <LatentModel M>
double log_prior(const M& model, const Vector& z) {
  detail::check_latent(model.latent_dim(), z);
  return model.log_prior(z);
}

template <LatentModel M>
Vector sample_prior(const M& model, Rng& rng) {
  return model.sample_prior(rng);
}

template <LatentModel M>
double decoder_log_lik(const M& model, const MaskedPoint& point, const Vector& z, Scope scope) {
  detail::check_latent(model.latent_dim(), z);
  detail::check_data(model.data_dim(), point.size());
  if (scope == Scope::kObservedOnly && !model.capabilities().supports_obs_marginal)
    throw CapabilityError("model does not support observed-only decoder likelihood");
  return model.decoder_log_lik(point.values(), point, z, scope);
}

template <LatentModel M>
Vector sample_decoder_conditional(const M& model, const MaskedPoint& point, const Vector& z, Rng& rng) {
  detail::check_latent(model.latent_dim(), z);
  detail::check_data(model.data_dim(), point.size());
  if (point.n_missing() == 0) throw UsageError("sample_decoder_conditional: point has no missing coordinates");
  return model.sample_decoder_conditional(point, z, rng);
}

template <LatentModel M>
double encoder_log_q(const M& model, const Vector& z, const Vector& x_full) {
  detail::check_latent(model.latent_dim(), z);
  detail::check_data(model.data_dim(), static_cast<std::size_t>(x_full.size()));
  return model.encoder(x_full).log_density(z);
}

template <LatentModel M>
Vector encoder_sample(const M& model, const Vector& x_full, Rng& rng) {
  detail::check_data(model.data_dim(), static_cast<std::size_t>(x_full.size()));
  return model.encoder(x_full).sample(rng);
}

/// Result of drawing from a prior-variational mixture.
struct MixtureDraw {
  Vector z;
  bool from_prior = false;
};

/// (1 - eps) q(z | x) + eps p(z) over a fitted encoder and the model prior.
template <LatentModel M>
class MixtureProposal {
 public:
  MixtureProposal(const M& model, EncoderOf<M> encoder, double epsilon)
      : model_(&model), encoder_(std::move(encoder)), epsilon_(epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("mixture epsilon must lie in [0, 1]");
    log_eps_ = std::log(epsilon);
    log_one_minus_eps_ = std::log1p(-epsilon);
  }

  [[nodiscard]] double epsilon() const { return epsilon_; }
  [[nodiscard]] const EncoderOf<M>& encoder() const { return encoder_; }

  [[nodiscard]] double log_density(const Vector& z) const {
    if (epsilon_ == 0.0) return encoder_.log_density(z);
    if (epsilon_ == 1.0) return model_->log_prior(z);
    return log_add_exp(log_one_minus_eps_ + encoder_.log_density(z), log_eps_ + model_->log_prior(z));
  }

  /// Component indicator ~ Bernoulli(eps), then a draw from that component.
  MixtureDraw draw(Rng& rng) const {
    const bool prior = rng.uniform() < epsilon_;
    return prior ? MixtureDraw{model_->sample_prior(rng), true} : MixtureDraw{encoder_.sample(rng), false};
  }

  Vector sample(Rng& rng) const { return draw(rng).z; }

 private:
  const M* model_;
  EncoderOf<M> encoder_;
  double epsilon_;
  double log_eps_ = kNegInf;
  double log_one_minus_eps_ = 0.0;
};

template <LatentModel M>
double mixture_log_q(const MixtureProposal<M>& prop, const Vector& z) {
  return prop.log_density(z);
}

}  // namespace condsamp
