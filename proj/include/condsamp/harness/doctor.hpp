#pragma once

// Built-in self-test: closed-form checks that need no external data.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/harness/config.hpp"
#include "condsamp/harness/io.hpp"
#include "condsamp/lair/importance.hpp"
#include "condsamp/metrics/metrics.hpp"
#include "condsamp/samplers/acmwg.hpp"

namespace condsamp {

struct DoctorCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

struct UniformBins {
  std::pair<double, double> domain() const { return {0.0, 1.0}; }
  std::vector<double> bin_masses(double, double, std::size_t bins) const {
    return std::vector<double>(bins, 1.0 / static_cast<double>(bins));
  }
};

template <class F>
bool throws_config_error(F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

template <class F>
bool throws_error(F&& f) {
  try {
    f();
  } catch (const Error&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

inline SampleCloud cloud_of(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return SampleCloud(std::move(m));
}

}  // namespace detail

inline std::vector<DoctorCheck> run_doctor() {
  using detail::cloud_of;
  std::vector<DoctorCheck> out;
  const auto check = [&](std::string name, const std::function<bool(std::string&)>& f) {
    DoctorCheck c{std::move(name), false, {}};
    try {
      c.passed = f(c.detail);
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    out.push_back(std::move(c));
  };
  const auto near = [](double a, double b, double tol, std::string& d) {
    d = "got " + fmt_double(a) + ", expected " + fmt_double(b);
    return std::abs(a - b) <= tol;
  };

  check("tv_point_mass_vs_uniform", [&](std::string& d) {
    return near(tv_grid(SampleCloud::from_scalars(std::vector<double>(100, 0.001)), detail::UniformBins{}, 64),
                1.0 - 1.0 / 64.0, 1e-12, d);
  });
  check("tv_identical_histograms", [&](std::string& d) {
    return near(tv_histograms({0.25, 0.5, 0.25}, {0.25, 0.5, 0.25}), 0.0, 0.0, d);
  });
  check("tv_empty_cloud_rejected", [&](std::string&) {
    return detail::throws_error([] { (void)tv_grid(SampleCloud(Matrix(0, 1)), detail::UniformBins{}, 64); });
  });
  check("energy_self_distance", [&](std::string& d) {
    const auto x = cloud_of({{0.0, 1.0}, {2.0, -1.0}, {0.5, 0.5}});
    return near(energy_distance(x, x).statistic, 0.0, 1e-12, d);
  });
  check("energy_degenerate_clouds", [&](std::string& d) {
    return near(energy_distance(cloud_of({{0.0}, {0.0}}), cloud_of({{3.0}, {3.0}})).statistic, 6.0, 1e-12, d);
  });
  check("laplacian_mmd_self_distance", [&](std::string& d) {
    const auto x = cloud_of({{0.0}, {1.0}, {4.0}});
    return laplacian_mmd(x, x, 1.0) <= 1e-12 && near(laplacian_mmd(x, x, 1.0), 0.0, 1e-12, d);
  });
  check("laplacian_mmd_constant_kernel_limit", [&](std::string& d) {
    const double v = laplacian_mmd(cloud_of({{0.0}, {1.0}}), cloud_of({{2.0}, {5.0}}), 1e9);
    d = "got " + fmt_double(v);
    return v < 1e-6;
  });
  check("sinkhorn_single_points", [&](std::string& d) {
    const auto r = sinkhorn_distance(cloud_of({{1.0, 2.0}}), cloud_of({{4.0, -2.0}}), {0.7, 100, 1e-12});
    return near(r.cost, 25.0, 1e-12, d);
  });
  check("sinkhorn_two_point_identity", [&](std::string& d) {
    const auto r = sinkhorn_distance(cloud_of({{0.0}, {1.0}}), cloud_of({{0.0}, {1.0}}), {1e-3, 10000, 1e-12});
    d = "got " + fmt_double(r.cost);
    return r.cost < 1e-4;
  });
  check("pointwise_exact_imputation", [&](std::string& d) {
    const auto e = pointwise_errors({{1.5, 1.5}, {-2.0}}, {1.5, -2.0});
    return near(e.rmse + e.mae, 0.0, 0.0, d);
  });
  check("pointwise_mean_cancellation", [&](std::string& d) {
    return near(pointwise_errors({{0.0, 2.0}}, {1.0}).rmse, 0.0, 1e-15, d);
  });
  check("pointwise_constant_offset", [&](std::string& d) {
    const auto e = pointwise_errors({{1.0, 1.0, 1.0}}, {0.0});
    return near(e.rmse, 1.0, 1e-15, d) && near(e.mae, 1.0, 1e-15, d);
  });
  check("acmwg_epsilon_zero_rejected", [&](std::string&) {
    return detail::throws_config_error([] { validate_acmwg_epsilon(0.0); }) &&
           detail::throws_config_error([] { validate_acmwg_epsilon(1.0); });
  });
  check("config_unknown_key_rejected", [&](std::string& d) {
    try {
      (void)parse_config(nlohmann::json{{"schema_version", 1}, {"bogus", 1}});
    } catch (const ConfigError& e) {
      d = e.what();
      return d.find("bogus") != std::string::npos;
    }
    return false;
  });
  check("masked_point_needs_both_parts", [&](std::string&) {
    return detail::throws_error([] { MaskedPoint(Vector::Zero(2), {true, true}).require_conditional_task(); });
  });
  check("normalised_weights_sum_to_one", [&](std::string& d) {
    const std::vector<double> lw{-1000.0, -1001.0, -999.5};
    double s = 0.0;
    for (double w : normalize_log_weights(lw)) s += w;
    return near(s, 1.0, 1e-12, d);
  });
  return out;
}

}  // namespace condsamp
