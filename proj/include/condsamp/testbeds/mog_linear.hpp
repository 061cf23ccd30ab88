#pragma once

// Linear-Gaussian decoder under a Gaussian-mixture prior:
//
//   z ~ sum_c pi_c N(m_c, S_c),   x | z ~ N(A z + b, diag(psi^2)).
//
// Every conditional of the joint is a Gaussian mixture, so the exact encoder
// p(z | x), the posterior p(z | x_obs) and the target p(x_mis | x_obs) are all
// available in closed form.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/core/gaussian_mixture.hpp"
#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"

namespace condsamp {

/// How the model's encoder deviates from the exact posterior p(z | x).
struct EncoderPerturbation {
  enum class Kind { kExact, kWidened, kNarrowed, kBiased };
  Kind kind = Kind::kExact;
  double scale = 1.0;  // std multiplier for widened/narrowed
  Vector shift;        // mean shift for biased (latent_dim entries)

  static EncoderPerturbation exact() { return {}; }
  static EncoderPerturbation widened(double s) { return {Kind::kWidened, s, {}}; }
  static EncoderPerturbation narrowed(double s) { return {Kind::kNarrowed, s, {}}; }
  static EncoderPerturbation biased(Vector delta) { return {Kind::kBiased, 1.0, std::move(delta)}; }
};

struct MogLinearConfig {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  Matrix loading;  // data_dim x latent_dim
  Vector offset;   // data_dim
  Vector noise_std;
  EncoderPerturbation encoder;
};

class MogLinearModel {
 public:
  explicit MogLinearModel(MogLinearConfig cfg) : cfg_(std::move(cfg)) { build(); }

  [[nodiscard]] const MogLinearConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t latent_dim() const { return static_cast<std::size_t>(cfg_.loading.cols()); }
  [[nodiscard]] std::size_t data_dim() const { return static_cast<std::size_t>(cfg_.loading.rows()); }
  [[nodiscard]] Capabilities capabilities() const { return {true, true}; }
  [[nodiscard]] const GaussianMixture& prior() const { return prior_; }
  [[nodiscard]] const EncoderPerturbation& perturbation() const { return cfg_.encoder; }

  [[nodiscard]] double log_prior(const Vector& z) const { return prior_.log_density(z); }
  [[nodiscard]] Vector sample_prior(Rng& rng) const { return prior_.sample(rng); }

  [[nodiscard]] double decoder_log_lik(const Vector& x, const MaskedPoint& point, const Vector& z, Scope scope) const {
    const Vector mu = cfg_.loading * z + cfg_.offset;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      if (scope == Scope::kObservedOnly && !point.observed(static_cast<std::size_t>(i))) continue;
      acc += log_normal_pdf(x[i], mu[i], noise_[i]);
    }
    return acc;
  }

  [[nodiscard]] Vector sample_decoder_conditional(const MaskedPoint& point, const Vector& z, Rng& rng) const {
    const Vector mu = cfg_.loading * z + cfg_.offset;
    const auto& mis = point.missing_indices();
    Vector out(static_cast<Eigen::Index>(mis.size()));
    for (std::size_t j = 0; j < mis.size(); ++j) {
      const auto i = static_cast<Eigen::Index>(mis[j]);
      out[static_cast<Eigen::Index>(j)] = rng.normal(mu[i], noise_[i]);
    }
    return out;
  }

  /// Exact posterior p(z | x), then the configured perturbation.
  [[nodiscard]] GaussianMixture encoder(const Vector& x_full) const {
    std::vector<double> logw(prior_.size());
    std::vector<Gaussian> comps;
    comps.reserve(prior_.size());
    const auto& pe = cfg_.encoder;
    const double s2 = (pe.kind == EncoderPerturbation::Kind::kWidened || pe.kind == EncoderPerturbation::Kind::kNarrowed)
                          ? pe.scale * pe.scale
                          : 1.0;
    for (std::size_t c = 0; c < prior_.size(); ++c) {
      logw[c] = std::log(prior_.weights()[c]) + x_marginals_[c].log_density(x_full);
      Vector mean = post_cov_[c] * (prior_prec_mean_[c] + at_psi_inv_ * (x_full - cfg_.offset));
      if (pe.kind == EncoderPerturbation::Kind::kBiased) mean += pe.shift;
      comps.emplace_back(std::move(mean), s2 * post_cov_[c]);
    }
    return {normalise(logw), std::move(comps)};
  }

  /// p(z | x_obs) from the observed rows only.
  [[nodiscard]] GaussianMixture exact_posterior(const MaskedPoint& point) const {
    const auto rows = observed_block(point);
    std::vector<double> logw(prior_.size());
    std::vector<Gaussian> comps;
    for (std::size_t c = 0; c < prior_.size(); ++c) {
      const Matrix s_inv = prior_.components()[c].covariance().inverse();
      const Matrix prec = s_inv + rows.a.transpose() * rows.psi_inv.asDiagonal() * rows.a;
      const Matrix cov = prec.inverse();
      const Vector mean =
          cov * (s_inv * prior_.components()[c].mean() + rows.a.transpose() * rows.psi_inv.asDiagonal() * (rows.x - rows.b));
      comps.emplace_back(mean, symmetrise(cov));
      logw[c] = std::log(prior_.weights()[c]) + observed_marginal(c, rows).log_density(rows.x);
    }
    return {normalise(logw), std::move(comps)};
  }

  /// log p(x_obs), exact.
  [[nodiscard]] double log_marginal_observed(const MaskedPoint& point) const {
    const auto rows = observed_block(point);
    if (rows.x.size() == 0) return 0.0;
    std::vector<double> terms(prior_.size());
    for (std::size_t c = 0; c < prior_.size(); ++c)
      terms[c] = std::log(prior_.weights()[c]) + observed_marginal(c, rows).log_density(rows.x);
    return log_sum_exp(terms);
  }

  /// Exact p(x_mis | x_obs) as a Gaussian mixture over the missing coordinates.
  [[nodiscard]] GaussianMixture exact_conditional(const MaskedPoint& point) const {
    const auto& obs = point.observed_indices();
    const auto& mis = point.missing_indices();
    if (mis.empty()) throw UsageError("exact_conditional: point has no missing coordinates");
    const Vector xo = point.observed_values();
    std::vector<double> logw(prior_.size());
    std::vector<Gaussian> comps;
    for (std::size_t c = 0; c < prior_.size(); ++c) {
      const Vector mu = x_marginals_[c].mean();
      const Matrix cov = x_marginals_[c].covariance();
      const Matrix s_mm = pick(cov, mis, mis);
      const Vector mu_m = pick(mu, mis);
      if (obs.empty()) {
        comps.emplace_back(mu_m, symmetrise(s_mm));
        logw[c] = std::log(prior_.weights()[c]);
        continue;
      }
      const Matrix s_oo = pick(cov, obs, obs);
      const Matrix s_mo = pick(cov, mis, obs);
      const Vector mu_o = pick(mu, obs);
      const Eigen::LLT<Matrix> llt(s_oo);
      const Vector cond_mean = mu_m + s_mo * llt.solve(xo - mu_o);
      const Matrix cond_cov = s_mm - s_mo * llt.solve(s_mo.transpose());
      comps.emplace_back(cond_mean, symmetrise(cond_cov));
      logw[c] = std::log(prior_.weights()[c]) + Gaussian(mu_o, s_oo).log_density(xo);
    }
    return {normalise(logw), std::move(comps)};
  }

  /// Ancestral draw (z, x) from the joint.
  [[nodiscard]] std::pair<Vector, Vector> sample_joint(Rng& rng) const {
    Vector z = prior_.sample(rng);
    Vector x = cfg_.loading * z + cfg_.offset;
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += noise_[i] * rng.normal();
    return {std::move(z), std::move(x)};
  }

 private:
  struct ObservedRows {
    Matrix a;
    Vector b;
    Vector psi_inv;  // 1 / noise variance
    Vector x;
  };

  static Matrix symmetrise(const Matrix& m) { return 0.5 * (m + m.transpose()); }

  static std::vector<double> normalise(const std::vector<double>& logw) {
    const double lse = log_sum_exp(logw);
    std::vector<double> w(logw.size());
    for (std::size_t c = 0; c < w.size(); ++c) w[c] = std::exp(logw[c] - lse);
    return w;
  }

  static Matrix pick(const Matrix& m, const std::vector<std::size_t>& r, const std::vector<std::size_t>& c) {
    Matrix out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = 0; j < c.size(); ++j)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            m(static_cast<Eigen::Index>(r[i]), static_cast<Eigen::Index>(c[j]));
    return out;
  }

  static Vector pick(const Vector& v, const std::vector<std::size_t>& r) {
    Vector out(static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(r[i])];
    return out;
  }

  [[nodiscard]] ObservedRows observed_block(const MaskedPoint& point) const {
    const auto& obs = point.observed_indices();
    ObservedRows rows;
    const auto n = static_cast<Eigen::Index>(obs.size());
    rows.a.resize(n, cfg_.loading.cols());
    rows.b.resize(n);
    rows.psi_inv.resize(n);
    rows.x.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto i = static_cast<Eigen::Index>(obs[static_cast<std::size_t>(k)]);
      rows.a.row(k) = cfg_.loading.row(i);
      rows.b[k] = cfg_.offset[i];
      rows.psi_inv[k] = 1.0 / (noise_[i] * noise_[i]);
      rows.x[k] = point.values()[i];
    }
    return rows;
  }

  [[nodiscard]] Gaussian observed_marginal(std::size_t c, const ObservedRows& rows) const {
    const auto& g = prior_.components()[c];
    const Matrix cov = rows.a * g.covariance() * rows.a.transpose() +
                       Matrix(rows.psi_inv.cwiseInverse().asDiagonal());
    return {rows.a * g.mean() + rows.b, symmetrise(cov)};
  }

  void build() {
    const std::size_t n = cfg_.weights.size();
    const auto dz = cfg_.loading.cols();
    const auto dx = cfg_.loading.rows();
    if (n == 0 || cfg_.means.size() != n || cfg_.covs.size() != n)
      throw ConfigError("mog-linear: weights, means and covs must have the same nonzero length");
    if (dz == 0 || dx == 0) throw ConfigError("mog-linear: loading matrix must be non-empty");
    if (cfg_.offset.size() != dx || cfg_.noise_std.size() != dx)
      throw ConfigError("mog-linear: offset and noise_std need one entry per data coordinate");
    std::vector<Gaussian> comps;
    for (std::size_t c = 0; c < n; ++c) {
      if (cfg_.means[c].size() != dz || cfg_.covs[c].rows() != dz || cfg_.covs[c].cols() != dz)
        throw ConfigError("mog-linear: component " + std::to_string(c) + " has the wrong latent dimension");
      comps.emplace_back(cfg_.means[c], cfg_.covs[c]);  // throws on a singular covariance
    }
    prior_ = GaussianMixture(cfg_.weights, std::move(comps));

    noise_.resize(dx);
    for (Eigen::Index i = 0; i < dx; ++i) {
      if (!(cfg_.noise_std[i] > 0.0)) throw ConfigError("mog-linear: noise_std must be positive");
      noise_[i] = std::max(cfg_.noise_std[i], kDecoderStdFloor);
    }
    auto& pe = cfg_.encoder;
    if (pe.kind == EncoderPerturbation::Kind::kWidened || pe.kind == EncoderPerturbation::Kind::kNarrowed) {
      if (!(pe.scale > 0.0)) throw ConfigError("encoder perturbation scale must be positive");
    }
    if (pe.kind == EncoderPerturbation::Kind::kBiased && pe.shift.size() != dz)
      throw ConfigError("encoder bias needs one entry per latent coordinate");

    const Vector psi_inv = noise_.array().square().inverse();
    at_psi_inv_ = cfg_.loading.transpose() * psi_inv.asDiagonal();
    const Matrix gram = at_psi_inv_ * cfg_.loading;
    post_cov_.clear();
    prior_prec_mean_.clear();
    x_marginals_.clear();
    for (std::size_t c = 0; c < n; ++c) {
      const Matrix s_inv = cfg_.covs[c].inverse();
      post_cov_.push_back(symmetrise((s_inv + gram).inverse()));
      prior_prec_mean_.push_back(s_inv * cfg_.means[c]);
      const Matrix cov = cfg_.loading * cfg_.covs[c] * cfg_.loading.transpose() + Matrix(noise_.array().square().matrix().asDiagonal());
      x_marginals_.emplace_back(cfg_.loading * cfg_.means[c] + cfg_.offset, symmetrise(cov));
    }
  }

  MogLinearConfig cfg_;
  GaussianMixture prior_;
  Vector noise_;
  Matrix at_psi_inv_;
  std::vector<Matrix> post_cov_;
  std::vector<Vector> prior_prec_mean_;
  std::vector<Gaussian> x_marginals_;
};

/// Same model with a different encoder perturbation; the exact posterior is unchanged.
inline MogLinearModel perturb_encoder(const MogLinearModel& model, EncoderPerturbation mode) {
  MogLinearConfig cfg = model.config();
  cfg.encoder = std::move(mode);
  return MogLinearModel(std::move(cfg));
}

inline MogLinearModel build_mog_linear(MogLinearConfig cfg) { return MogLinearModel(std::move(cfg)); }

static_assert(LatentModel<MogLinearModel>);
static_assert(ExactPosteriorModel<MogLinearModel>);

}  // namespace condsamp
