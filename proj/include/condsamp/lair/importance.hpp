#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"

namespace condsamp {

enum class ResamplingScheme { kMultinomial, kSystematic };

/// exp(log_w - logsumexp(log_w)); throws DegenerateError when every weight is zero.
inline std::vector<double> normalize_log_weights(std::span<const double> log_w) {
  const double lse = log_sum_exp(log_w);
  if (lse == kNegInf || std::isnan(lse))
    throw DegenerateError("all importance weights are zero; x_obs is likely outside the model's support");
  std::vector<double> w(log_w.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_w[i] - lse);
  return w;
}

/// Effective sample size 1 / sum(w_i^2) of the normalised weights.
inline double ess(std::span<const double> log_w) {
  const auto w = normalize_log_weights(log_w);
  double s = 0.0;
  for (double v : w) s += v * v;
  return 1.0 / s;
}

namespace detail {

inline std::vector<double> cumulative(const std::vector<double>& w) {
  std::vector<double> c(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) c[i] = (acc += w[i]);
  return c;
}

// first index whose cumulative weight exceeds u, skipping zero-weight entries
inline std::size_t locate(const std::vector<double>& cum, const std::vector<double>& w, double u) {
  auto i = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
  if (i >= cum.size()) i = cum.size() - 1;
  while (w[i] == 0.0 && i > 0) --i;
  while (w[i] == 0.0 && i + 1 < w.size()) ++i;
  return i;
}

}  // namespace detail

/// n i.i.d. indices drawn in proportion to the normalised weights.
inline std::vector<std::size_t> multinomial_resample(std::span<const double> log_w, std::size_t n, Rng& rng) {
  const auto w = normalize_log_weights(log_w);
  const auto cum = detail::cumulative(w);
  const double total = cum.back();
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = detail::locate(cum, w, rng.uniform() * total);
  return idx;
}

/// Systematic resampling: one uniform offset, n evenly spaced positions.
inline std::vector<std::size_t> systematic_resample(std::span<const double> log_w, std::size_t n, Rng& rng) {
  const auto w = normalize_log_weights(log_w);
  const auto cum = detail::cumulative(w);
  const double total = cum.back();
  std::vector<std::size_t> idx(n);
  if (n == 0) return idx;
  const double u0 = rng.uniform();
  for (std::size_t j = 0; j < n; ++j)
    idx[j] = detail::locate(cum, w, total * (static_cast<double>(j) + u0) / static_cast<double>(n));
  return idx;
}

inline std::vector<std::size_t> resample(std::span<const double> log_w, std::size_t n, Rng& rng,
                                         ResamplingScheme scheme) {
  return scheme == ResamplingScheme::kSystematic ? systematic_resample(log_w, n, rng)
                                                 : multinomial_resample(log_w, n, rng);
}

/// The model prior viewed as a proposal density.
template <LatentModel M>
class PriorDensity {
 public:
  explicit PriorDensity(const M& model) : model_(&model) {}
  [[nodiscard]] double log_density(const Vector& z) const { return model_->log_prior(z); }
  [[nodiscard]] Vector sample(Rng& rng) const { return model_->sample_prior(rng); }

 private:
  const M* model_;
};

struct IrResult {
  std::vector<Vector> proposals;
  std::vector<double> log_weights;
  std::vector<std::size_t> indices;  // resampled proposal indices
  std::vector<Vector> latents;       // proposals[indices[i]]
  std::vector<Vector> imputations;   // decoded from latents
  double log_marginal = kNegInf;     // log-mean-exp of the weights
  double log_marginal_se = 0.0;      // delta-method standard error of log_marginal
};

/// Self-normalised importance resampling from an arbitrary proposal density:
/// M proposals, weights log p(x_obs, z) - log r(z), M resampled latents, each decoded.
template <LatentModel M, LatentDensity D>
IrResult standard_ir(const M& model, const MaskedPoint& point, std::size_t m, const D& proposal, Rng& rng,
                     ResamplingScheme scheme = ResamplingScheme::kMultinomial) {
  if (m < 1) throw ConfigError("importance resampling needs M >= 1 proposals");
  point.require_conditional_task();
  IrResult out;
  out.proposals.reserve(m);
  out.log_weights.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.proposals.push_back(proposal.sample(rng));
  for (const Vector& z : out.proposals) {
    const double lp = model.log_prior(z);
    const double lj = lp == kNegInf ? kNegInf : model.decoder_log_lik(point.values(), point, z, Scope::kObservedOnly) + lp;
    out.log_weights.push_back(lj == kNegInf ? kNegInf : lj - proposal.log_density(z));
  }
  out.indices = resample(out.log_weights, m, rng, scheme);
  for (std::size_t i : out.indices) {
    out.latents.push_back(out.proposals[i]);
    out.imputations.push_back(model.sample_decoder_conditional(point, out.proposals[i], rng));
  }

  const double lse = log_sum_exp(out.log_weights);
  out.log_marginal = lse - std::log(static_cast<double>(m));
  const double mx = *std::max_element(out.log_weights.begin(), out.log_weights.end());
  double s1 = 0.0, s2 = 0.0;
  for (double lw : out.log_weights) {
    const double v = std::exp(lw - mx);
    s1 += v;
    s2 += v * v;
  }
  const double md = static_cast<double>(m);
  const double mean = s1 / md;
  const double var = m > 1 ? std::max(0.0, (s2 - md * mean * mean) / (md - 1.0)) : 0.0;
  out.log_marginal_se = std::sqrt(var) / (std::sqrt(md) * mean);
  return out;
}

template <LatentModel M>
IrResult standard_ir_prior(const M& model, const MaskedPoint& point, std::size_t m, Rng& rng,
                           ResamplingScheme scheme = ResamplingScheme::kMultinomial) {
  return standard_ir(model, point, m, PriorDensity<M>(model), rng, scheme);
}

/// Proposal q(z | x_full) from the encoder at a fixed full data vector.
template <LatentModel M>
IrResult standard_ir_encoder(const M& model, const MaskedPoint& point, std::size_t m, const Vector& x_full, Rng& rng,
                             ResamplingScheme scheme = ResamplingScheme::kMultinomial) {
  return standard_ir(model, point, m, model.encoder(x_full), rng, scheme);
}

}  // namespace condsamp
