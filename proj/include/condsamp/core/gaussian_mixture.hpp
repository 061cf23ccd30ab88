#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/rng.hpp"

namespace condsamp {

/// Multivariate normal with a cached Cholesky factor.
class Gaussian {
 public:
  Gaussian() = default;
  Gaussian(Vector mean, const Matrix& cov) : mean_(std::move(mean)) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw ConfigError("covariance is not positive definite");
    chol_ = llt.matrixL();
    log_det_ = 2.0 * chol_.diagonal().array().log().sum();
  }

  [[nodiscard]] const Vector& mean() const { return mean_; }
  [[nodiscard]] Matrix covariance() const { return chol_ * chol_.transpose(); }
  [[nodiscard]] const Matrix& chol() const { return chol_; }
  [[nodiscard]] Eigen::Index dim() const { return mean_.size(); }

  [[nodiscard]] double log_density(const Vector& x) const {
    const Vector r = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return -0.5 * r.squaredNorm() - 0.5 * log_det_ - static_cast<double>(dim()) * kLogSqrt2Pi;
  }

  [[nodiscard]] Vector sample(Rng& rng) const {
    Vector e(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) e[i] = rng.normal();
    return mean_ + chol_ * e;
  }

 private:
  Vector mean_;
  Matrix chol_;
  double log_det_ = 0.0;
};

/// Finite mixture of multivariate normals.
class GaussianMixture {
 public:
  GaussianMixture() = default;
  GaussianMixture(std::vector<double> weights, std::vector<Gaussian> comps)
      : weights_(std::move(weights)), comps_(std::move(comps)) {
    if (weights_.size() != comps_.size() || comps_.empty()) throw ConfigError("mixture needs matching weights/components");
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0)) throw ConfigError("mixture weights must be non-negative");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("mixture weights must not all be zero");
    for (double& w : weights_) w /= total;
    log_weights_.resize(weights_.size());
    for (std::size_t c = 0; c < weights_.size(); ++c) log_weights_[c] = std::log(weights_[c]);
  }

  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<Gaussian>& components() const { return comps_; }
  [[nodiscard]] std::size_t size() const { return comps_.size(); }
  [[nodiscard]] Eigen::Index dim() const { return comps_.front().dim(); }

  [[nodiscard]] double log_density(const Vector& x) const {
    if (comps_.size() == 1) return comps_.front().log_density(x);
    std::vector<double> terms(comps_.size());
    for (std::size_t c = 0; c < comps_.size(); ++c) terms[c] = log_weights_[c] + comps_[c].log_density(x);
    return log_sum_exp(terms);
  }

  [[nodiscard]] Vector sample(Rng& rng) const {
    std::size_t c = 0;
    if (comps_.size() > 1) {
      double u = rng.uniform();
      while (c + 1 < comps_.size() && u >= weights_[c]) u -= weights_[c++];
    }
    return comps_[c].sample(rng);
  }

  [[nodiscard]] Vector mean() const {
    Vector m = Vector::Zero(dim());
    for (std::size_t c = 0; c < comps_.size(); ++c) m += weights_[c] * comps_[c].mean();
    return m;
  }

  [[nodiscard]] Matrix covariance() const {
    const Vector m = mean();
    Matrix s = Matrix::Zero(dim(), dim());
    for (std::size_t c = 0; c < comps_.size(); ++c) {
      const Vector d = comps_[c].mean() - m;
      s += weights_[c] * (comps_[c].covariance() + d * d.transpose());
    }
    return s;
  }

  /// One-dimensional marginal of coordinate `i`.
  [[nodiscard]] GaussianMixture marginal(Eigen::Index i) const {
    std::vector<Gaussian> out;
    for (const auto& g : comps_) {
      const Matrix c = g.covariance();
      out.emplace_back(Vector::Constant(1, g.mean()[i]), Matrix::Constant(1, 1, c(i, i)));
    }
    return {weights_, std::move(out)};
  }

  // 1D helpers (valid when dim() == 1)

  [[nodiscard]] double cdf(double x) const {
    double acc = 0.0;
    for (std::size_t c = 0; c < comps_.size(); ++c)
      acc += weights_[c] * normal_cdf((x - comps_[c].mean()[0]) / comps_[c].chol()(0, 0));
    return acc;
  }

  /// Union of mean +/- 6 sd over components.
  [[nodiscard]] std::pair<double, double> domain() const {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& g : comps_) {
      const double s = g.chol()(0, 0);
      lo = std::min(lo, g.mean()[0] - 6.0 * s);
      hi = std::max(hi, g.mean()[0] + 6.0 * s);
    }
    return {lo, hi};
  }

  [[nodiscard]] std::vector<double> bin_masses(double lo, double hi, std::size_t bins) const {
    std::vector<double> out(bins);
    const double w = (hi - lo) / static_cast<double>(bins);
    double prev = cdf(lo);
    for (std::size_t b = 0; b < bins; ++b) {
      const double next = cdf(lo + w * static_cast<double>(b + 1));
      out[b] = next - prev;
      prev = next;
    }
    return out;
  }

 private:
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Gaussian> comps_;
};

}  // namespace condsamp
