#pragma once

// Synthetic VAE with a one-dimensional uniform latent on [0, 1] and a
// diagonal Gaussian decoder whose mean traces a piecewise-linear path through
// a list of anchor points. Each anchor owns a plateau (a z-interval where the
// decoder mean sits on the anchor), consecutive anchors are joined by linear
// ramps. Because the mean is piecewise linear in z, every integral over z of
// a product of decoder Gaussians is a sum of truncated-Gaussian integrals, so
// marginals and posterior moments are computed in closed form.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"

namespace condsamp {

struct GridVaeAnchor {
  std::vector<double> center;
  double width = 0.0;  // plateau length before normalisation of the z-axis
};

struct GridVaeConfig {
  std::vector<GridVaeAnchor> anchors;
  std::vector<double> ramp_widths;  // anchors.size() - 1 entries
  std::vector<double> decoder_std;  // one per data coordinate
  double widening = 1.5;            // encoder std multiplier, >= 1
};

/// Beta(a, b) encoder over the unit-interval latent.
class BetaEncoder {
 public:
  BetaEncoder(double a, double b) : a_(a), b_(b), log_norm_(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b)) {}

  [[nodiscard]] double a() const { return a_; }
  [[nodiscard]] double b() const { return b_; }
  [[nodiscard]] double mean() const { return a_ / (a_ + b_); }
  [[nodiscard]] double variance() const {
    const double s = a_ + b_;
    return a_ * b_ / (s * s * (s + 1.0));
  }

  [[nodiscard]] double log_density(const Vector& z) const {
    const double v = z[0];
    if (!(v > 0.0 && v < 1.0)) return kNegInf;
    return (a_ - 1.0) * std::log(v) + (b_ - 1.0) * std::log1p(-v) + log_norm_;
  }

  [[nodiscard]] Vector sample(Rng& rng) const {
    double v = rng.beta(a_, b_);
    // keep draws strictly inside the support so they score finite
    v = std::clamp(v, 0x1.0p-60, 1.0 - 0x1.0p-53);
    if (std::isnan(v)) v = mean();
    return Vector::Constant(1, v);
  }

 private:
  double a_;
  double b_;
  double log_norm_;
};

/// Moments of a non-normalised density over z, in log space.
struct LatentMoments {
  double log_mass = kNegInf;
  double mean = 0.5;
  double variance = 1.0 / 12.0;
};

class GridVaeModel;

/// Exact posterior p(z | x_obs) of the grid VAE; sampling by rejection from the prior.
class GridVaePosterior {
 public:
  GridVaePosterior(const GridVaeModel* model, MaskedPoint point, double log_evidence, double log_lik_bound)
      : model_(model), point_(std::move(point)), log_evidence_(log_evidence), log_lik_bound_(log_lik_bound) {}

  [[nodiscard]] double log_density(const Vector& z) const;
  [[nodiscard]] Vector sample(Rng& rng) const;
  [[nodiscard]] double log_evidence() const { return log_evidence_; }

 private:
  const GridVaeModel* model_;
  MaskedPoint point_;
  double log_evidence_;
  double log_lik_bound_;
};

class GridVaeModel {
 public:
  struct Segment {
    double z0 = 0.0;
    double z1 = 0.0;
    std::vector<double> start;  // decoder mean at z0
    std::vector<double> end;    // decoder mean at z1
    bool plateau = false;
  };

  explicit GridVaeModel(GridVaeConfig cfg) : cfg_(std::move(cfg)) { build(); }

  [[nodiscard]] const GridVaeConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t latent_dim() const { return 1; }
  [[nodiscard]] std::size_t data_dim() const { return dim_; }
  [[nodiscard]] Capabilities capabilities() const { return {true, true}; }
  [[nodiscard]] double widening() const { return cfg_.widening; }
  [[nodiscard]] const std::vector<Segment>& segments() const { return segments_; }
  [[nodiscard]] const std::vector<double>& decoder_std() const { return std_; }

  /// z-interval attributed to anchor j: its plateau plus half of each adjacent ramp.
  [[nodiscard]] std::pair<double, double> mode_interval(std::size_t j) const { return mode_intervals_.at(j); }
  [[nodiscard]] std::size_t n_modes() const { return mode_intervals_.size(); }

  /// Index of the mode interval containing z.
  [[nodiscard]] std::size_t mode_of(double z) const {
    for (std::size_t j = 0; j + 1 < mode_intervals_.size(); ++j)
      if (z < mode_intervals_[j].second) return j;
    return mode_intervals_.size() - 1;
  }

  [[nodiscard]] double log_prior(const Vector& z) const { return (z[0] >= 0.0 && z[0] <= 1.0) ? 0.0 : kNegInf; }

  [[nodiscard]] Vector sample_prior(Rng& rng) const { return Vector::Constant(1, rng.uniform()); }

  /// Decoder mean at z (clamped to [0, 1]).
  [[nodiscard]] Vector decoder_mean(double z) const {
    z = std::clamp(z, 0.0, 1.0);
    const Segment& s = segment_at(z);
    const double len = s.z1 - s.z0;
    const double u = len > 0.0 ? (z - s.z0) / len : 0.0;
    Vector mu(static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < dim_; ++i) mu[idx(i)] = s.start[i] + u * (s.end[i] - s.start[i]);
    return mu;
  }

  [[nodiscard]] double decoder_log_lik(const Vector& x, const MaskedPoint& point, const Vector& z, Scope scope) const {
    const Vector mu = decoder_mean(z[0]);
    double acc = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      if (scope == Scope::kObservedOnly && !point.observed(i)) continue;
      acc += log_normal_pdf(x[idx(i)], mu[idx(i)], std_[i]);
    }
    return acc;
  }

  [[nodiscard]] Vector sample_decoder_conditional(const MaskedPoint& point, const Vector& z, Rng& rng) const {
    const Vector mu = decoder_mean(z[0]);
    const auto& mis = point.missing_indices();
    Vector out(static_cast<Eigen::Index>(mis.size()));
    for (std::size_t j = 0; j < mis.size(); ++j) out[idx(j)] = rng.normal(mu[idx(mis[j])], std_[mis[j]]);
    return out;
  }

  /// Moment-matched Beta fitted to p(z | x_full), standard deviation widened.
  [[nodiscard]] BetaEncoder encoder(const Vector& x_full) const {
    const LatentMoments mom = posterior_moments(x_full, all_coords_);
    return fit_beta(mom.mean, mom.variance * cfg_.widening * cfg_.widening);
  }

  /// Encoder with the same posterior fit but a different widening factor.
  [[nodiscard]] BetaEncoder encoder_with_widening(const Vector& x_full, double widening) const {
    const LatentMoments mom = posterior_moments(x_full, all_coords_);
    return fit_beta(mom.mean, mom.variance * widening * widening);
  }

  /// Non-normalised moments of prod_{i in coords} N(x_i; mu_i(z), s_i) over z in [0, 1].
  /// log_mass is log of the integral including the Gaussian normalisers.
  [[nodiscard]] LatentMoments posterior_moments(const Vector& x, const std::vector<std::size_t>& coords) const {
    std::vector<LatentMoments> parts;
    parts.reserve(segments_.size());
    for (const Segment& s : segments_) parts.push_back(segment_moments(s, x, coords));
    double lm = kNegInf;
    for (const auto& p : parts) lm = log_add_exp(lm, p.log_mass);
    LatentMoments out;
    out.log_mass = lm;
    if (lm == kNegInf) return out;
    double mean = 0.0;
    double second = 0.0;
    for (const auto& p : parts) {
      if (p.log_mass == kNegInf) continue;
      const double w = std::exp(p.log_mass - lm);
      mean += w * p.mean;
      second += w * (p.variance + p.mean * p.mean);
    }
    out.mean = mean;
    out.variance = std::max(second - mean * mean, 1e-300);
    double norm = 0.0;
    for (std::size_t i : coords) norm += std::log(std_[i]) + kLogSqrt2Pi;
    out.log_mass -= norm;
    return out;
  }

  /// log p(x) for a fully observed data vector.
  [[nodiscard]] double log_marginal(const Vector& x) const { return posterior_moments(x, all_coords_).log_mass; }

  /// log p(x_obs), exact.
  [[nodiscard]] double log_marginal_observed(const MaskedPoint& point) const {
    return posterior_moments(point.values(), point.observed_indices()).log_mass;
  }

  [[nodiscard]] GridVaePosterior exact_posterior(const MaskedPoint& point) const {
    double bound = 0.0;
    for (std::size_t i : point.observed_indices()) bound -= std::log(std_[i]) + kLogSqrt2Pi;
    return GridVaePosterior(this, point, log_marginal_observed(point), bound);
  }

 private:
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  static BetaEncoder fit_beta(double mean, double var) {
    const double m = std::clamp(mean, 1e-9, 1.0 - 1e-9);
    const double cap = m * (1.0 - m);
    // a moment-matched Beta needs var < m(1-m); cap keeps a + b >= 0.5
    var = std::min(var, cap / 1.5);
    const double k = cap / var - 1.0;
    return BetaEncoder(m * k, (1.0 - m) * k);
  }

  [[nodiscard]] const Segment& segment_at(double z) const {
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), z);
    std::size_t k = static_cast<std::size_t>(std::distance(breaks_.begin(), it));
    k = k == 0 ? 0 : k - 1;
    return segments_[std::min(k, segments_.size() - 1)];
  }

  LatentMoments segment_moments(const Segment& s, const Vector& x, const std::vector<std::size_t>& coords) const {
    // exponent in u = z - z0:  -0.5 * (A u^2 - 2 B u + C)
    const double len = s.z1 - s.z0;
    LatentMoments out;
    if (len <= 0.0) return out;
    double A = 0.0, B = 0.0, C = 0.0;
    for (std::size_t i : coords) {
      const double inv = 1.0 / (std_[i] * std_[i]);
      const double d = (s.end[i] - s.start[i]) / len;
      const double r = x[idx(i)] - s.start[i];
      A += d * d * inv;
      B += r * d * inv;
      C += r * r * inv;
    }
    if (A * len * len < 1e-12) {
      out.log_mass = -0.5 * C + std::log(len);
      out.mean = s.z0 + 0.5 * len;
      out.variance = len * len / 12.0;
      return out;
    }
    const double m = B / A;
    const double tau = 1.0 / std::sqrt(A);
    const double lo = (0.0 - m) / tau;
    const double hi = (len - m) / tau;
    const double log_z = log_normal_interval(lo, hi);
    out.log_mass = -0.5 * (C - B * m) + std::log(tau) + kLogSqrt2Pi + log_z;
    // truncated-normal moments via ratios evaluated in log space
    const double log_phi_lo = -0.5 * lo * lo - kLogSqrt2Pi;
    const double log_phi_hi = -0.5 * hi * hi - kLogSqrt2Pi;
    const double r_lo = std::exp(log_phi_lo - log_z);
    const double r_hi = std::exp(log_phi_hi - log_z);
    const double lam = r_lo - r_hi;
    double var = 1.0 + lo * r_lo - hi * r_hi - lam * lam;
    var = std::clamp(var, 1e-12, 1.0);
    double mean = m + tau * lam;
    mean = std::clamp(mean, 0.0, len);
    out.mean = s.z0 + mean;
    out.variance = tau * tau * var;
    return out;
  }

  void build() {
    const std::size_t n = cfg_.anchors.size();
    if (n < 1) throw ConfigError("grid-vae: at least one anchor required");
    dim_ = cfg_.anchors.front().center.size();
    if (dim_ == 0) throw ConfigError("grid-vae: anchor centers must be non-empty");
    for (const auto& a : cfg_.anchors) {
      if (a.center.size() != dim_) throw ConfigError("grid-vae: anchor centers must share a dimension");
      if (!(a.width > 0.0)) throw ConfigError("grid-vae: anchor widths must be positive");
    }
    if (cfg_.ramp_widths.size() != n - 1) throw ConfigError("grid-vae: ramp_widths needs anchors-1 entries");
    for (double w : cfg_.ramp_widths)
      if (!(w > 0.0)) throw ConfigError("grid-vae: ramp widths must be positive");
    if (cfg_.decoder_std.size() != dim_) throw ConfigError("grid-vae: decoder_std needs one entry per coordinate");
    for (double s : cfg_.decoder_std)
      if (!(s > 0.0)) throw ConfigError("grid-vae: decoder stds must be positive");
    if (!(cfg_.widening >= 1.0)) throw ConfigError("grid-vae: widening must be >= 1");

    std_.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) std_[i] = std::max(cfg_.decoder_std[i], kDecoderStdFloor);
    all_coords_.resize(dim_);
    for (std::size_t i = 0; i < dim_; ++i) all_coords_[i] = i;

    double total = 0.0;
    for (const auto& a : cfg_.anchors) total += a.width;
    for (double w : cfg_.ramp_widths) total += w;

    double z = 0.0;
    segments_.clear();
    mode_intervals_.clear();
    for (std::size_t j = 0; j < n; ++j) {
      const double w = cfg_.anchors[j].width / total;
      const double left_half = j == 0 ? 0.0 : 0.5 * cfg_.ramp_widths[j - 1] / total;
      const double right_half = j + 1 == n ? 0.0 : 0.5 * cfg_.ramp_widths[j] / total;
      segments_.push_back({z, z + w, cfg_.anchors[j].center, cfg_.anchors[j].center, true});
      mode_intervals_.emplace_back(z - left_half, z + w + right_half);
      z += w;
      if (j + 1 < n) {
        const double r = cfg_.ramp_widths[j] / total;
        segments_.push_back({z, z + r, cfg_.anchors[j].center, cfg_.anchors[j + 1].center, false});
        z += r;
      }
    }
    segments_.back().z1 = 1.0;
    mode_intervals_.front().first = 0.0;
    mode_intervals_.back().second = 1.0;
    breaks_.clear();
    for (const auto& s : segments_) breaks_.push_back(s.z0);
  }

  GridVaeConfig cfg_;
  std::size_t dim_ = 0;
  std::vector<double> std_;
  std::vector<std::size_t> all_coords_;
  std::vector<Segment> segments_;
  std::vector<double> breaks_;
  std::vector<std::pair<double, double>> mode_intervals_;
};

inline double GridVaePosterior::log_density(const Vector& z) const {
  const double lp = model_->log_prior(z);
  if (lp == kNegInf) return kNegInf;
  return lp + model_->decoder_log_lik(point_.values(), point_, z, Scope::kObservedOnly) - log_evidence_;
}

inline Vector GridVaePosterior::sample(Rng& rng) const {
  // envelope: p(x_obs | z) <= prod of Gaussian peak heights
  for (long attempt = 0; attempt < 100'000'000L; ++attempt) {
    Vector z = model_->sample_prior(rng);
    const double ll = model_->decoder_log_lik(point_.values(), point_, z, Scope::kObservedOnly);
    if (std::log(rng.uniform()) < ll - log_lik_bound_) return z;
  }
  throw NumericalSupportError("grid-vae posterior rejection sampler exhausted its attempt budget");
}

static_assert(LatentModel<GridVaeModel>);
static_assert(ExactPosteriorModel<GridVaeModel>);

}  // namespace condsamp
