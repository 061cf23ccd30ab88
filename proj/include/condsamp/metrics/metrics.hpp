#pragma once

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/core/log_math.hpp"
#include "condsamp/core/masked_point.hpp"

namespace condsamp {

/// n samples of dimension d, one per row, with optional nonnegative weights.
struct SampleCloud {
  Matrix points;
  std::vector<double> weights;  // empty = uniform

  SampleCloud() = default;
  explicit SampleCloud(Matrix p, std::vector<double> w = {}) : points(std::move(p)), weights(std::move(w)) {
    if (!weights.empty()) {
      if (weights.size() != static_cast<std::size_t>(points.rows()))
        throw UsageError("sample weights must match the number of samples");
      double s = 0.0;
      for (double v : weights) {
        if (!(v >= 0.0)) throw UsageError("sample weights must be nonnegative");
        s += v;
      }
      if (!(s > 0.0)) throw UsageError("sample weights must not all be zero");
      for (double& v : weights) v /= s;
    }
  }

  static SampleCloud from_scalars(const std::vector<double>& xs) {
    Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = xs[i];
    return SampleCloud(std::move(m));
  }

  static SampleCloud from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return SampleCloud(Matrix(0, 0));
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return SampleCloud(std::move(m));
  }

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
  [[nodiscard]] double weight(std::size_t i) const {
    return weights.empty() ? 1.0 / static_cast<double>(size()) : weights[i];
  }
};

/// Oracles usable by tv_grid: a domain and exact bin masses over it.
template <class O>
concept BinnedOracle = requires(const O& o, double lo, double hi, std::size_t bins) {
  { o.domain() } -> std::convertible_to<std::pair<double, double>>;
  { o.bin_masses(lo, hi, bins) } -> std::convertible_to<std::vector<double>>;
};

/// Total variation between the histogram of 1D samples and the oracle's bin
/// masses over the oracle domain. Mass falling outside the domain, on either
/// side, is counted as disagreement.
template <BinnedOracle O>
double tv_grid(const SampleCloud& samples, const O& oracle, std::size_t bins = 64) {
  if (samples.size() == 0) throw UsageError("tv_grid: empty sample cloud");
  if (samples.dim() != 1) throw UsageError("tv_grid: 1D samples expected");
  if (bins < 1) throw UsageError("tv_grid: bins must be >= 1");
  const auto [lo, hi] = oracle.domain();
  const auto ref = oracle.bin_masses(lo, hi, bins);
  std::vector<double> hist(bins, 0.0);
  double outside = 0.0;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples.points(static_cast<Eigen::Index>(i), 0);
    const double w = samples.weight(i);
    if (!(x >= lo && x <= hi)) {
      outside += w;
      continue;
    }
    auto b = static_cast<std::size_t>((x - lo) / width);
    hist[std::min(b, bins - 1)] += w;
  }
  double ref_total = 0.0;
  double acc = outside;
  for (std::size_t b = 0; b < bins; ++b) {
    acc += std::abs(hist[b] - ref[b]);
    ref_total += ref[b];
  }
  acc += std::max(0.0, 1.0 - ref_total);
  return std::min(1.0, 0.5 * acc);
}

/// TV between two 1D sample clouds histogrammed on a shared range.
inline double tv_histograms(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw UsageError("tv_histograms: bin counts differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

/// TV of 2D samples (column 0 over [x_lo, x_hi], column 1 over [z_lo, z_hi])
/// against row-major reference bin masses.
inline double tv_grid_2d(const SampleCloud& samples, const std::vector<double>& ref, std::size_t bins_x,
                         std::size_t bins_z, std::pair<double, double> x_range, std::pair<double, double> z_range) {
  if (samples.size() == 0) throw UsageError("tv_grid: empty sample cloud");
  if (samples.dim() != 2) throw UsageError("tv_grid_2d: 2D samples expected");
  if (ref.size() != bins_x * bins_z) throw UsageError("tv_grid_2d: reference has the wrong number of bins");
  std::vector<double> hist(bins_x * bins_z, 0.0);
  double outside = 0.0;
  const double wx = (x_range.second - x_range.first) / static_cast<double>(bins_x);
  const double wz = (z_range.second - z_range.first) / static_cast<double>(bins_z);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples.points(static_cast<Eigen::Index>(i), 0);
    const double z = samples.points(static_cast<Eigen::Index>(i), 1);
    const double w = samples.weight(i);
    if (!(x >= x_range.first && x <= x_range.second && z >= z_range.first && z <= z_range.second)) {
      outside += w;
      continue;
    }
    const auto bx = std::min(static_cast<std::size_t>((x - x_range.first) / wx), bins_x - 1);
    const auto bz = std::min(static_cast<std::size_t>((z - z_range.first) / wz), bins_z - 1);
    hist[bx * bins_z + bz] += w;
  }
  double acc = outside;
  double ref_total = 0.0;
  for (std::size_t b = 0; b < hist.size(); ++b) {
    acc += std::abs(hist[b] - ref[b]);
    ref_total += ref[b];
  }
  acc += std::max(0.0, 1.0 - ref_total);
  return std::min(1.0, 0.5 * acc);
}

namespace detail {

inline void check_pair(const SampleCloud& x, const SampleCloud& y, const char* what) {
  if (x.dim() != y.dim())
    throw UsageError(std::string(what) + ": sample clouds have different dimensions (" + std::to_string(x.dim()) +
                     " vs " + std::to_string(y.dim()) + ")");
  if (x.size() < 2 || y.size() < 2) throw UsageError(std::string(what) + ": each cloud needs at least 2 samples");
}

// Deterministic ordering of a pair of clouds so that f(X, Y) and f(Y, X)
// perform the identical computation.
inline bool canonical_first(const SampleCloud& a, const SampleCloud& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  const auto n = static_cast<std::size_t>(a.points.size());
  const int c = std::memcmp(a.points.data(), b.points.data(), n * sizeof(double));
  if (c != 0) return c < 0;
  if (a.weights.size() != b.weights.size()) return a.weights.size() < b.weights.size();
  return std::memcmp(a.weights.data(), b.weights.data(), a.weights.size() * sizeof(double)) <= 0;
}

template <class F>
double pair_mean(const SampleCloud& x, const SampleCloud& y, F&& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      acc += f(x.points.row(static_cast<Eigen::Index>(i)), y.points.row(static_cast<Eigen::Index>(j)));
  return acc / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

template <class F>
double within_mean(const SampleCloud& x, F&& f) {
  double acc = 0.0;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      acc += f(x.points.row(static_cast<Eigen::Index>(i)), x.points.row(static_cast<Eigen::Index>(j)));
  return 2.0 * acc / (static_cast<double>(n) * static_cast<double>(n - 1));
}

inline double euclid(const auto& a, const auto& b) { return (a - b).norm(); }
inline double l1(const auto& a, const auto& b) { return (a - b).template lpNorm<1>(); }

}  // namespace detail

struct EnergyResult {
  double statistic = 0.0;  // 2 E|x-y| - E|x-x'| - E|y-y'|, clipped at 0
  double distance = 0.0;   // sqrt(statistic)
};

/// Unbiased energy statistic with the Euclidean norm.
inline EnergyResult energy_distance(const SampleCloud& x_in, const SampleCloud& y_in) {
  detail::check_pair(x_in, y_in, "energy_distance");
  const bool keep = detail::canonical_first(x_in, y_in);
  const SampleCloud& x = keep ? x_in : y_in;
  const SampleCloud& y = keep ? y_in : x_in;
  const auto f = [](const auto& a, const auto& b) { return detail::euclid(a, b); };
  const double stat = 2.0 * detail::pair_mean(x, y, f) - detail::within_mean(x, f) - detail::within_mean(y, f);
  const double clipped = std::max(0.0, stat);
  return {clipped, std::sqrt(clipped)};
}

/// Median pairwise L1 distance over the pooled clouds, from at most `max_points` evenly spaced samples.
inline double median_l1_bandwidth(const SampleCloud& x, const SampleCloud& y, std::size_t max_points = 1000) {
  std::vector<Vector> pool;
  const std::size_t total = x.size() + y.size();
  const std::size_t stride = std::max<std::size_t>(1, total / max_points);
  for (std::size_t i = 0; i < total; i += stride)
    pool.push_back(i < x.size() ? Vector(x.points.row(static_cast<Eigen::Index>(i)).transpose())
                                : Vector(y.points.row(static_cast<Eigen::Index>(i - x.size())).transpose()));
  std::vector<double> d;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j) d.push_back((pool[i] - pool[j]).lpNorm<1>());
  if (d.empty()) return 1.0;
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

/// Unbiased MMD^2 with the Laplacian kernel exp(-|x - y|_1 / sigma), clipped at 0.
inline double laplacian_mmd(const SampleCloud& x_in, const SampleCloud& y_in, std::optional<double> sigma = std::nullopt) {
  detail::check_pair(x_in, y_in, "laplacian_mmd");
  const double s = sigma.value_or(median_l1_bandwidth(x_in, y_in));
  if (!(s > 0.0)) throw UsageError("laplacian_mmd: sigma must be positive");
  const bool keep = detail::canonical_first(x_in, y_in);
  const SampleCloud& x = keep ? x_in : y_in;
  const SampleCloud& y = keep ? y_in : x_in;
  const auto k = [s](const auto& a, const auto& b) { return std::exp(-detail::l1(a, b) / s); };
  const double v = detail::within_mean(x, k) + detail::within_mean(y, k) - 2.0 * detail::pair_mean(x, y, k);
  return std::max(0.0, v);
}

struct SinkhornOptions {
  std::optional<double> reg;  // absolute; default 0.05 * median pairwise cost
  std::size_t max_iters = 10000;
  double tol = 1e-9;          // L1 marginal violation
};

struct SinkhornResult {
  double cost = 0.0;  // <P, C> of the regularised plan
  double reg = 0.0;
  std::size_t iterations = 0;
  double marginal_error = 0.0;
  bool converged = false;
  Matrix plan;
};

inline double median_pairwise_sq_cost(const SampleCloud& x, const SampleCloud& y) {
  std::vector<double> c;
  c.reserve(x.size() * y.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      c.push_back((x.points.row(static_cast<Eigen::Index>(i)) - y.points.row(static_cast<Eigen::Index>(j))).squaredNorm());
  auto mid = c.begin() + static_cast<std::ptrdiff_t>(c.size() / 2);
  std::nth_element(c.begin(), mid, c.end());
  return *mid;
}

/// Entropic optimal transport with squared-Euclidean cost, log-domain updates.
inline SinkhornResult sinkhorn_distance(const SampleCloud& x_in, const SampleCloud& y_in,
                                        const SinkhornOptions& opt = {}) {
  if (x_in.dim() != y_in.dim()) throw UsageError("sinkhorn_distance: sample clouds have different dimensions");
  if (x_in.size() == 0 || y_in.size() == 0) throw UsageError("sinkhorn_distance: empty sample cloud");
  const bool keep = detail::canonical_first(x_in, y_in);
  const SampleCloud& x = keep ? x_in : y_in;
  const SampleCloud& y = keep ? y_in : x_in;
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto m = static_cast<Eigen::Index>(y.size());

  Matrix C(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) C(i, j) = (x.points.row(i) - y.points.row(j)).squaredNorm();

  SinkhornResult res;
  double reg = opt.reg.value_or(0.0);
  if (!opt.reg) {
    const double med = median_pairwise_sq_cost(x, y);
    reg = med > 0.0 ? 0.05 * med : 1e-3;
  }
  if (!(reg > 0.0)) throw UsageError("sinkhorn_distance: reg must be positive");
  res.reg = reg;

  Vector log_a(n), log_b(m);
  for (Eigen::Index i = 0; i < n; ++i) log_a[i] = std::log(x.weight(static_cast<std::size_t>(i)));
  for (Eigen::Index j = 0; j < m; ++j) log_b[j] = std::log(y.weight(static_cast<std::size_t>(j)));
  Vector f = Vector::Zero(n), g = Vector::Zero(m);
  std::vector<double> buf(static_cast<std::size_t>(std::max(n, m)));

  const auto update_f = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) buf[static_cast<std::size_t>(j)] = (g[j] - C(i, j)) / reg + log_b[j];
      f[i] = -reg * log_sum_exp(std::span<const double>(buf.data(), static_cast<std::size_t>(m)));
    }
  };
  const auto update_g = [&] {
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = (f[i] - C(i, j)) / reg + log_a[i];
      g[j] = -reg * log_sum_exp(std::span<const double>(buf.data(), static_cast<std::size_t>(n)));
    }
  };
  const auto row_error = [&] {
    double err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) row += std::exp((f[i] + g[j] - C(i, j)) / reg + log_a[i] + log_b[j]);
      err += std::abs(row - std::exp(log_a[i]));
    }
    return err;
  };

  for (res.iterations = 1; res.iterations <= opt.max_iters; ++res.iterations) {
    update_f();
    update_g();  // columns now match exactly
    if (res.iterations % 10 == 0 || res.iterations == opt.max_iters || n == 1 || m == 1) {
      res.marginal_error = row_error();
      if (res.marginal_error < opt.tol) {
        res.converged = true;
        break;
      }
    }
  }
  if (res.iterations > opt.max_iters) res.iterations = opt.max_iters;

  res.plan.resize(n, m);
  double cost = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const double p = std::exp((f[i] + g[j] - C(i, j)) / reg + log_a[i] + log_b[j]);
      res.plan(i, j) = p;
      cost += p * C(i, j);
    }
  res.cost = std::max(0.0, cost);
  if (!keep) res.plan.transposeInPlace();
  return res;
}

struct PointwiseErrors {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t entries = 0;
};

/// `samples[e]` holds the imputation draws for missing entry e, `truth[e]` its true value.
/// RMSE scores the per-entry sample mean, MAE the per-entry sample median.
inline PointwiseErrors pointwise_errors(const std::vector<std::vector<double>>& samples, const std::vector<double>& truth) {
  if (samples.size() != truth.size()) throw UsageError("pointwise_errors: samples and truth are misaligned");
  if (samples.empty()) throw UsageError("pointwise_errors: no missing entries");
  double se = 0.0, ae = 0.0;
  for (std::size_t e = 0; e < samples.size(); ++e) {
    std::vector<double> s = samples[e];
    if (s.empty()) throw UsageError("pointwise_errors: entry without imputations");
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    std::sort(s.begin(), s.end());
    const std::size_t h = s.size() / 2;
    const double median = s.size() % 2 ? s[h] : 0.5 * (s[h - 1] + s[h]);
    se += (mean - truth[e]) * (mean - truth[e]);
    ae += std::abs(median - truth[e]);
  }
  const auto k = static_cast<double>(samples.size());
  return {std::sqrt(se / k), ae / k, samples.size()};
}

/// One entry of the metrics report.
struct MetricRecord {
  std::string metric_name;
  double value = 0.0;
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  std::vector<std::pair<std::string, double>> params;
  std::vector<std::pair<std::string, std::string>> labels;
  bool converged = true;
};

}  // namespace condsamp
