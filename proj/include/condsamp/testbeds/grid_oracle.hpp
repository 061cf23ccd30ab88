#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/rng.hpp"
#include "condsamp/testbeds/grid_vae.hpp"

namespace condsamp {

/// Uniform grid of nodes on [lo, hi] integrated with the trapezoidal rule.
class UniformGrid {
 public:
  UniformGrid() = default;
  UniformGrid(double lo, double hi, std::size_t n) : lo_(lo), hi_(hi), n_(n) {
    if (n < 2) throw ConfigError("quadrature grid needs at least 2 nodes");
    if (!(hi > lo)) throw ConfigError("quadrature grid needs hi > lo");
    h_ = (hi - lo) / static_cast<double>(n - 1);
  }

  [[nodiscard]] double lo() const { return lo_; }
  [[nodiscard]] double hi() const { return hi_; }
  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] double spacing() const { return h_; }
  [[nodiscard]] double node(std::size_t i) const { return i + 1 == n_ ? hi_ : lo_ + h_ * static_cast<double>(i); }
  [[nodiscard]] double weight(std::size_t i) const { return (i == 0 || i + 1 == n_) ? 0.5 * h_ : h_; }

  /// Integral over [a, b] of each node's hat basis function, as (node, weight) pairs.
  [[nodiscard]] std::vector<std::pair<std::size_t, double>> hat_integrals(double a, double b) const {
    std::vector<std::pair<std::size_t, double>> out;
    a = std::max(a, lo_);
    b = std::min(b, hi_);
    if (!(b > a)) return out;
    const auto first = static_cast<std::size_t>(std::max(0.0, std::floor((a - lo_) / h_) - 1.0));
    const auto last = std::min(n_ - 1, static_cast<std::size_t>(std::ceil((b - lo_) / h_) + 1.0));
    for (std::size_t i = first; i <= last; ++i) {
      const double w = hat_cdf(i, b) - hat_cdf(i, a);
      if (w > 0.0) out.emplace_back(i, w);
    }
    return out;
  }

 private:
  // integral of node i's hat function from lo to t
  [[nodiscard]] double hat_cdf(std::size_t i, double t) const {
    const double s = std::clamp((t - node(i)) / h_, -1.0, 1.0);
    double v = s <= 0.0 ? 0.5 * (s + 1.0) * (s + 1.0) : 1.0 - 0.5 * (1.0 - s) * (1.0 - s);
    if (i == 0) v = s <= 0.0 ? 0.0 : v - 0.5;  // left half lies outside the domain
    if (i + 1 == n_) v = std::min(v, 0.5);
    return h_ * v;
  }

  double lo_ = 0.0;
  double hi_ = 1.0;
  std::size_t n_ = 0;
  double h_ = 1.0;
};

struct OracleGridSpec {
  std::size_t n_latent = 2048;
  std::size_t n_x = 2048;
  double x_lo = -1.0;
  double x_hi = 2.0;
};

/// Quadrature ground truth for a two-coordinate grid-VAE task with one observed
/// and one missing coordinate: tables for p(x_mis, z | x_obs), p(z | x_obs) and
/// p(x_mis | x_obs), each normalised to unit trapezoidal mass, plus the exact
/// log-normaliser log p(x_obs).
class GridOracle {
 public:
  GridOracle(const GridVaeModel& model, MaskedPoint point, const OracleGridSpec& spec)
      : model_(&model), point_(std::move(point)), x_grid_(spec.x_lo, spec.x_hi, spec.n_x), z_grid_(0.0, 1.0, spec.n_latent) {
    if (model.data_dim() != 2 || point_.n_observed() != 1 || point_.n_missing() != 1)
      throw UsageError("grid oracle needs a 2D model with exactly one observed and one missing coordinate");
    log_evidence_ = model.log_marginal_observed(point_);
    if (!(std::exp(log_evidence_) >= DBL_EPSILON))
      throw NumericalSupportError("p(x_obs) is below machine epsilon; x_obs lies outside the model's support");
    build();
  }

  [[nodiscard]] const MaskedPoint& point() const { return point_; }
  [[nodiscard]] const UniformGrid& x_grid() const { return x_grid_; }
  [[nodiscard]] const UniformGrid& z_grid() const { return z_grid_; }
  [[nodiscard]] double log_evidence() const { return log_evidence_; }

  /// joint(i, j) = p(x_mis = x_i, z = z_j | x_obs)
  [[nodiscard]] double joint(std::size_t i, std::size_t j) const { return joint_[i * z_grid_.size() + j]; }
  [[nodiscard]] const std::vector<double>& xmis_density() const { return x_marginal_; }
  [[nodiscard]] const std::vector<double>& z_density() const { return z_marginal_; }

  /// Exact log p(z | x_obs) at an arbitrary latent value.
  [[nodiscard]] double log_posterior_z(double z) const {
    const Vector zv = Vector::Constant(1, z);
    const double lp = model_->log_prior(zv);
    if (lp == kNegInf) return kNegInf;
    return lp + model_->decoder_log_lik(point_.values(), point_, zv, Scope::kObservedOnly) - log_evidence_;
  }

  [[nodiscard]] std::pair<double, double> domain() const { return {x_grid_.lo(), x_grid_.hi()}; }

  /// Probability mass of p(x_mis | x_obs) in `bins` equal bins over [lo, hi].
  [[nodiscard]] std::vector<double> bin_masses(double lo, double hi, std::size_t bins) const {
    std::vector<double> out(bins, 0.0);
    const double w = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b < bins; ++b)
      for (auto [i, h] : x_grid_.hat_integrals(lo + w * b, lo + w * (b + 1))) out[b] += h * x_marginal_[i];
    return out;
  }

  /// Joint mass over a bins_x-by-bins_z grid covering the x-domain and [0, 1].
  [[nodiscard]] std::vector<double> joint_bin_masses(std::size_t bins_x, std::size_t bins_z) const {
    std::vector<double> out(bins_x * bins_z, 0.0);
    const double wx = (x_grid_.hi() - x_grid_.lo()) / static_cast<double>(bins_x);
    const double wz = 1.0 / static_cast<double>(bins_z);
    std::vector<std::vector<std::pair<std::size_t, double>>> hz(bins_z);
    for (std::size_t c = 0; c < bins_z; ++c) hz[c] = z_grid_.hat_integrals(wz * c, wz * (c + 1));
    for (std::size_t b = 0; b < bins_x; ++b) {
      const auto hx = x_grid_.hat_integrals(x_grid_.lo() + wx * b, x_grid_.lo() + wx * (b + 1));
      for (std::size_t c = 0; c < bins_z; ++c) {
        double acc = 0.0;
        for (auto [i, a] : hx)
          for (auto [j, g] : hz[c]) acc += a * g * joint(i, j);
        out[b * bins_z + c] = acc;
      }
    }
    return out;
  }

  [[nodiscard]] double xmis_mean() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < x_grid_.size(); ++i) acc += x_grid_.weight(i) * x_grid_.node(i) * x_marginal_[i];
    return acc;
  }

  [[nodiscard]] double xmis_variance() const {
    const double m = xmis_mean();
    double acc = 0.0;
    for (std::size_t i = 0; i < x_grid_.size(); ++i) {
      const double d = x_grid_.node(i) - m;
      acc += x_grid_.weight(i) * d * d * x_marginal_[i];
    }
    return acc;
  }

  /// Posterior mass of p(z | x_obs) inside [a, b].
  [[nodiscard]] double z_mass(double a, double b) const {
    double acc = 0.0;
    for (auto [j, h] : z_grid_.hat_integrals(a, b)) acc += h * z_marginal_[j];
    return acc;
  }

  /// Exact draw (x_mis, z) ~ p(x_mis, z | x_obs): z by rejection from the
  /// prior against the likelihood peak, then x_mis from the decoder.
  [[nodiscard]] std::pair<double, double> sample(Rng& rng) const {
    const GridVaePosterior post = model_->exact_posterior(point_);
    const Vector z = post.sample(rng);
    const Vector x = model_->sample_decoder_conditional(point_, z, rng);
    return {x[0], z[0]};
  }

 private:
  void build() {
    const std::size_t nx = x_grid_.size();
    const std::size_t nz = z_grid_.size();
    const std::size_t obs = point_.observed_indices()[0];
    const std::size_t mis = point_.missing_indices()[0];
    const auto& sd = model_->decoder_std();
    const double x_obs = point_.values()[static_cast<Eigen::Index>(obs)];

    std::vector<double> log_pz(nz);
    std::vector<double> mu_mis(nz);
    for (std::size_t j = 0; j < nz; ++j) {
      const Vector mu = model_->decoder_mean(z_grid_.node(j));
      mu_mis[j] = mu[static_cast<Eigen::Index>(mis)];
      log_pz[j] = log_normal_pdf(x_obs, mu[static_cast<Eigen::Index>(obs)], sd[obs]) - log_evidence_;
    }

    z_marginal_.assign(nz, 0.0);
    double z_total = 0.0;
    for (std::size_t j = 0; j < nz; ++j) {
      z_marginal_[j] = std::exp(log_pz[j]);
      z_total += z_grid_.weight(j) * z_marginal_[j];
    }
    for (double& v : z_marginal_) v /= z_total;

    joint_.assign(nx * nz, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = x_grid_.node(i);
      for (std::size_t j = 0; j < nz; ++j) {
        const double v = std::exp(log_pz[j] + log_normal_pdf(x, mu_mis[j], sd[mis]));
        joint_[i * nz + j] = v;
        total += x_grid_.weight(i) * z_grid_.weight(j) * v;
      }
    }
    for (double& v : joint_) v /= total;

    x_marginal_.assign(nx, 0.0);
    for (std::size_t i = 0; i < nx; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < nz; ++j) acc += z_grid_.weight(j) * joint_[i * nz + j];
      x_marginal_[i] = acc;
    }
  }

  const GridVaeModel* model_;
  MaskedPoint point_;
  UniformGrid x_grid_;
  UniformGrid z_grid_;
  double log_evidence_ = 0.0;
  std::vector<double> joint_;
  std::vector<double> z_marginal_;
  std::vector<double> x_marginal_;
};

inline GridOracle grid_true_conditional(const GridVaeModel& model, const MaskedPoint& point,
                                        const OracleGridSpec& spec = {}) {
  return GridOracle(model, point, spec);
}

}  // namespace condsamp
