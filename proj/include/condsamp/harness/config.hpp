#pragma once

// Experiment configuration: strict JSON with a versioned schema. Unknown keys
// and out-of-domain values raise ConfigError naming the offending field.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "condsamp/core/error.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/lair/importance.hpp"
#include "condsamp/lair/lair.hpp"
#include "condsamp/samplers/run_chain.hpp"
#include "condsamp/testbeds/grid_oracle.hpp"
#include "condsamp/testbeds/grid_vae.hpp"
#include "condsamp/testbeds/mog_linear.hpp"

namespace condsamp {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct TaskConfig {
  std::string name;
  // explicit task
  std::optional<Vector> values;
  std::optional<std::vector<bool>> observed;
  // generated task
  std::optional<double> missing_fraction;
  std::optional<std::uint64_t> generate_seed;
  std::optional<Vector> init_z;
  bool has_truth = false;
};

enum class SamplerKind { kPseudoGibbs, kMwg, kAcMwg, kLair, kStandardIr };

struct InitConfig {
  std::string kind = "marginal";  // marginal | fixed | pseudo-gibbs-warmup | lair-warmup
  std::size_t n = 120;
  std::size_t K = 4;
  std::size_t R = 1;
  std::optional<Vector> z;
};

struct SamplerConfig {
  std::string name;
  SamplerKind kind = SamplerKind::kMwg;
  std::size_t T = 1000;
  std::size_t K = 19;
  std::size_t R = 1;
  std::size_t M = 1000;
  std::string proposal = "prior";  // standard-ir: prior | exact-posterior
  double epsilon = 0.05;
  InitConfig init;
  std::optional<ClipBounds> clip;
  std::size_t thin = 1;
  std::optional<std::size_t> burn_in;
  std::size_t history_window = 0;
  ResamplingScheme resampling = ResamplingScheme::kMultinomial;
  std::optional<std::size_t> n_out;
};

struct MetricOptions {
  std::size_t bins = 64;
  std::size_t max_samples = 1000;     // subsample size for pairwise metrics
  std::optional<double> sinkhorn_reg;  // absolute; default relative to the median cost
  std::size_t sinkhorn_max_iters = 2000;
  double sinkhorn_tol = 1e-6;
  std::optional<double> mmd_sigma;
};

struct BudgetConfig {
  std::string mode = "match-iterations";  // match-iterations | match-model-evals
  std::optional<std::size_t> evals;       // reference decoder evaluations per run
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string name = "experiment";
  std::string testbed_kind;
  std::optional<GridVaeConfig> grid;
  std::optional<MogLinearConfig> mog;
  OracleGridSpec oracle_grid;
  std::size_t joint_stride = 8;
  std::vector<TaskConfig> tasks;
  std::vector<SamplerConfig> samplers;
  std::vector<std::string> metrics;
  MetricOptions metric_options;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  BudgetConfig budget;
  std::size_t workers = 1;
  json raw;
};

inline const char* sampler_kind_name(SamplerKind k) {
  switch (k) {
    case SamplerKind::kPseudoGibbs: return "pseudo-gibbs";
    case SamplerKind::kMwg: return "mwg";
    case SamplerKind::kAcMwg: return "ac-mwg";
    case SamplerKind::kLair: return "lair";
    case SamplerKind::kStandardIr: return "standard-ir";
  }
  return "?";
}

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_fail(path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.contains(k)) config_fail(path + "." + k, "unknown key");
}

inline const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) config_fail(path + "." + key, "required field is missing");
  return j.at(key);
}

inline double get_double(const json& v, const std::string& path) {
  if (!v.is_number()) config_fail(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) config_fail(path, "expected a finite number");
  return d;
}

inline std::size_t get_count(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) config_fail(path, "expected a non-negative integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0) config_fail(path, "expected a non-negative integer");
  return v.get<std::size_t>();
}

inline std::uint64_t get_u64(const json& v, const std::string& path) {
  return static_cast<std::uint64_t>(get_count(v, path));
}

inline std::string get_string(const json& v, const std::string& path) {
  if (!v.is_string()) config_fail(path, "expected a string");
  return v.get<std::string>();
}

inline bool get_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) config_fail(path, "expected true or false");
  return v.get<bool>();
}

inline std::vector<double> get_doubles(const json& v, const std::string& path) {
  if (!v.is_array()) config_fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_double(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline Vector get_vector(const json& v, const std::string& path) {
  const auto d = get_doubles(v, path);
  return Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size()));
}

inline Matrix get_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) config_fail(path, "expected a non-empty array of rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < v.size(); ++i) rows.push_back(get_doubles(v[i], path + "[" + std::to_string(i) + "]"));
  const std::size_t cols = rows.front().size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) config_fail(path, "rows have different lengths");
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

inline GridVaeConfig parse_grid(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "anchors", "ramp_widths", "decoder_std", "widening"});
  GridVaeConfig g;
  const json& anchors = require(j, path, "anchors");
  if (!anchors.is_array() || anchors.empty()) config_fail(path + ".anchors", "expected a non-empty array");
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const std::string p = path + ".anchors[" + std::to_string(i) + "]";
    check_keys(anchors[i], p, {"center", "width"});
    g.anchors.push_back({get_doubles(require(anchors[i], p, "center"), p + ".center"),
                         get_double(require(anchors[i], p, "width"), p + ".width")});
  }
  g.ramp_widths = get_doubles(require(j, path, "ramp_widths"), path + ".ramp_widths");
  g.decoder_std = get_doubles(require(j, path, "decoder_std"), path + ".decoder_std");
  if (j.contains("widening")) g.widening = get_double(j["widening"], path + ".widening");
  try {
    GridVaeModel probe(g);
  } catch (const ConfigError& e) {
    config_fail(path, e.what());
  }
  return g;
}

inline MogLinearConfig parse_mog(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "weights", "means", "covs", "loading", "offset", "noise_std", "encoder"});
  MogLinearConfig m;
  m.weights = get_doubles(require(j, path, "weights"), path + ".weights");
  const json& means = require(j, path, "means");
  const json& covs = require(j, path, "covs");
  if (!means.is_array() || !covs.is_array()) config_fail(path, "means and covs must be arrays");
  for (std::size_t c = 0; c < means.size(); ++c)
    m.means.push_back(get_vector(means[c], path + ".means[" + std::to_string(c) + "]"));
  for (std::size_t c = 0; c < covs.size(); ++c)
    m.covs.push_back(get_matrix(covs[c], path + ".covs[" + std::to_string(c) + "]"));
  m.loading = get_matrix(require(j, path, "loading"), path + ".loading");
  m.offset = get_vector(require(j, path, "offset"), path + ".offset");
  m.noise_std = get_vector(require(j, path, "noise_std"), path + ".noise_std");
  if (j.contains("encoder")) {
    const std::string p = path + ".encoder";
    const json& e = j["encoder"];
    check_keys(e, p, {"mode", "scale", "shift"});
    const std::string mode = get_string(require(e, p, "mode"), p + ".mode");
    if (mode == "exact") {
      m.encoder = EncoderPerturbation::exact();
    } else if (mode == "widened" || mode == "narrowed") {
      const double s = get_double(require(e, p, "scale"), p + ".scale");
      if (!(s > 0.0)) config_fail(p + ".scale", "must be > 0");
      m.encoder = mode == "widened" ? EncoderPerturbation::widened(s) : EncoderPerturbation::narrowed(s);
    } else if (mode == "biased") {
      m.encoder = EncoderPerturbation::biased(get_vector(require(e, p, "shift"), p + ".shift"));
    } else {
      config_fail(p + ".mode", "expected exact | widened | narrowed | biased");
    }
  }
  try {
    MogLinearModel probe(m);
  } catch (const ConfigError& e) {
    config_fail(path, e.what());
  }
  return m;
}

inline InitConfig parse_init(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "n", "K", "R", "z"});
  InitConfig c;
  c.kind = get_string(require(j, path, "kind"), path + ".kind");
  if (c.kind != "marginal" && c.kind != "fixed" && c.kind != "pseudo-gibbs-warmup" && c.kind != "lair-warmup")
    config_fail(path + ".kind", "expected marginal | fixed | pseudo-gibbs-warmup | lair-warmup");
  if (j.contains("n")) c.n = get_count(j["n"], path + ".n");
  if (j.contains("K")) c.K = get_count(j["K"], path + ".K");
  if (j.contains("R")) c.R = get_count(j["R"], path + ".R");
  if (j.contains("z")) c.z = get_vector(j["z"], path + ".z");
  if ((c.kind == "pseudo-gibbs-warmup" || c.kind == "lair-warmup") && c.n < 1) config_fail(path + ".n", "must be >= 1");
  if (c.kind == "lair-warmup" && c.K < 1) config_fail(path + ".K", "must be >= 1");
  return c;
}

inline SamplerConfig parse_sampler(const json& j, const std::string& path) {
  check_keys(j, path, {"name", "kind", "T", "K", "R", "M", "proposal", "epsilon", "init", "clip", "thin", "burn_in",
                       "history_window", "resampling", "n_out"});
  SamplerConfig s;
  const std::string kind = get_string(require(j, path, "kind"), path + ".kind");
  if (kind == "pseudo-gibbs") s.kind = SamplerKind::kPseudoGibbs;
  else if (kind == "mwg") s.kind = SamplerKind::kMwg;
  else if (kind == "ac-mwg") s.kind = SamplerKind::kAcMwg;
  else if (kind == "lair") s.kind = SamplerKind::kLair;
  else if (kind == "standard-ir") s.kind = SamplerKind::kStandardIr;
  else config_fail(path + ".kind", "expected pseudo-gibbs | mwg | ac-mwg | lair | standard-ir");
  s.name = j.contains("name") ? get_string(j["name"], path + ".name") : kind;
  if (s.name.empty() || s.name.find_first_of("/\\ ") != std::string::npos)
    config_fail(path + ".name", "must be non-empty without spaces or slashes");
  if (j.contains("T")) s.T = get_count(j["T"], path + ".T");
  if (j.contains("K")) s.K = get_count(j["K"], path + ".K");
  if (j.contains("R")) s.R = get_count(j["R"], path + ".R");
  if (j.contains("M")) s.M = get_count(j["M"], path + ".M");
  if (j.contains("proposal")) {
    s.proposal = get_string(j["proposal"], path + ".proposal");
    if (s.proposal != "prior" && s.proposal != "exact-posterior")
      config_fail(path + ".proposal", "expected prior | exact-posterior");
  }
  if (j.contains("epsilon")) s.epsilon = get_double(j["epsilon"], path + ".epsilon");
  if (j.contains("init")) s.init = parse_init(j["init"], path + ".init");
  if (j.contains("clip")) {
    const auto b = get_doubles(j["clip"], path + ".clip");
    if (b.size() != 2 || !(b[1] > b[0])) config_fail(path + ".clip", "expected [lo, hi] with hi > lo");
    if (s.kind != SamplerKind::kPseudoGibbs) config_fail(path + ".clip", "clip bounds apply to pseudo-gibbs only");
    s.clip = ClipBounds{b[0], b[1]};
  }
  if (j.contains("thin")) s.thin = get_count(j["thin"], path + ".thin");
  if (j.contains("burn_in")) s.burn_in = get_count(j["burn_in"], path + ".burn_in");
  if (j.contains("history_window")) s.history_window = get_count(j["history_window"], path + ".history_window");
  if (j.contains("resampling")) {
    const std::string r = get_string(j["resampling"], path + ".resampling");
    if (r == "multinomial") s.resampling = ResamplingScheme::kMultinomial;
    else if (r == "systematic") s.resampling = ResamplingScheme::kSystematic;
    else config_fail(path + ".resampling", "expected multinomial | systematic");
  }
  if (j.contains("n_out")) s.n_out = get_count(j["n_out"], path + ".n_out");

  if (s.T < 1) config_fail(path + ".T", "must be >= 1");
  if (s.thin < 1) config_fail(path + ".thin", "must be >= 1");
  if (s.kind == SamplerKind::kAcMwg && !(s.epsilon > 0.0 && s.epsilon < 1.0))
    config_fail(path + ".epsilon", "AC-MWG epsilon must lie in the open interval (0, 1), got " + std::to_string(s.epsilon));
  if (s.kind == SamplerKind::kLair) {
    if (s.K + s.R < 1) config_fail(path, "LAIR needs K + R >= 1");
    if (s.K == 0 && !s.n_out) config_fail(path + ".n_out", "required when K = 0");
    if (s.n_out && *s.n_out < 1) config_fail(path + ".n_out", "must be >= 1");
  }
  if (s.kind == SamplerKind::kStandardIr && s.M < 1) config_fail(path + ".M", "must be >= 1");
  return s;
}

inline TaskConfig parse_task(const json& j, const std::string& path) {
  check_keys(j, path, {"name", "values", "observed", "missing_fraction", "seed", "init_z"});
  TaskConfig t;
  t.name = get_string(require(j, path, "name"), path + ".name");
  if (t.name.empty() || t.name.find_first_of("/\\ ") != std::string::npos)
    config_fail(path + ".name", "must be non-empty without spaces or slashes");
  const bool explicit_task = j.contains("values") || j.contains("observed");
  const bool generated = j.contains("missing_fraction") || j.contains("seed");
  if (explicit_task == generated)
    config_fail(path, "give either values + observed, or missing_fraction + seed");
  if (explicit_task) {
    t.values = get_vector(require(j, path, "values"), path + ".values");
    const json& obs = require(j, path, "observed");
    if (!obs.is_array()) config_fail(path + ".observed", "expected an array of booleans");
    std::vector<bool> mask;
    for (std::size_t i = 0; i < obs.size(); ++i) mask.push_back(get_bool(obs[i], path + ".observed[" + std::to_string(i) + "]"));
    if (mask.size() != static_cast<std::size_t>(t.values->size()))
      config_fail(path + ".observed", "must have the same length as values");
    bool any_obs = false, any_mis = false;
    for (bool b : mask) (b ? any_obs : any_mis) = true;
    if (!any_obs || !any_mis) config_fail(path + ".observed", "needs at least one observed and one missing coordinate");
    t.observed = std::move(mask);
  } else {
    t.missing_fraction = get_double(require(j, path, "missing_fraction"), path + ".missing_fraction");
    if (!(*t.missing_fraction > 0.0 && *t.missing_fraction < 1.0))
      config_fail(path + ".missing_fraction", "must lie in (0, 1)");
    t.generate_seed = get_u64(require(j, path, "seed"), path + ".seed");
    t.has_truth = true;
  }
  if (j.contains("init_z")) t.init_z = get_vector(j["init_z"], path + ".init_z");
  return t;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  using namespace detail;
  const std::string root = "config";
  check_keys(j, root, {"schema_version", "name", "testbed", "oracle", "tasks", "samplers", "metrics", "metric_options",
                       "seeds", "output_dir", "budget", "workers"});
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.schema_version = static_cast<int>(get_count(require(j, root, "schema_version"), root + ".schema_version"));
  if (cfg.schema_version != kSchemaVersion)
    config_fail(root + ".schema_version", "unsupported version " + std::to_string(cfg.schema_version) + " (expected " +
                                              std::to_string(kSchemaVersion) + ")");
  if (j.contains("name")) cfg.name = get_string(j["name"], root + ".name");

  const json& tb = require(j, root, "testbed");
  cfg.testbed_kind = get_string(require(tb, root + ".testbed", "kind"), root + ".testbed.kind");
  if (cfg.testbed_kind == "grid-vae") cfg.grid = parse_grid(tb, root + ".testbed");
  else if (cfg.testbed_kind == "mog-linear") cfg.mog = parse_mog(tb, root + ".testbed");
  else config_fail(root + ".testbed.kind", "expected grid-vae | mog-linear");

  if (j.contains("oracle")) {
    const json& o = j["oracle"];
    const std::string p = root + ".oracle";
    check_keys(o, p, {"n_latent", "n_x", "x_lo", "x_hi", "joint_stride"});
    if (o.contains("n_latent")) cfg.oracle_grid.n_latent = get_count(o["n_latent"], p + ".n_latent");
    if (o.contains("n_x")) cfg.oracle_grid.n_x = get_count(o["n_x"], p + ".n_x");
    if (o.contains("x_lo")) cfg.oracle_grid.x_lo = get_double(o["x_lo"], p + ".x_lo");
    if (o.contains("x_hi")) cfg.oracle_grid.x_hi = get_double(o["x_hi"], p + ".x_hi");
    if (o.contains("joint_stride")) cfg.joint_stride = get_count(o["joint_stride"], p + ".joint_stride");
    if (cfg.oracle_grid.n_latent < 2 || cfg.oracle_grid.n_x < 2) config_fail(p, "grids need at least 2 nodes");
    if (!(cfg.oracle_grid.x_hi > cfg.oracle_grid.x_lo)) config_fail(p, "x_hi must exceed x_lo");
    if (cfg.joint_stride < 1) config_fail(p + ".joint_stride", "must be >= 1");
  }

  const json& tasks = require(j, root, "tasks");
  if (!tasks.is_array() || tasks.empty()) config_fail(root + ".tasks", "expected a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    cfg.tasks.push_back(parse_task(tasks[i], root + ".tasks[" + std::to_string(i) + "]"));
    if (!names.insert(cfg.tasks.back().name).second)
      config_fail(root + ".tasks[" + std::to_string(i) + "].name", "duplicate task name");
  }
  const std::size_t data_dim =
      cfg.grid ? cfg.grid->anchors.front().center.size() : static_cast<std::size_t>(cfg.mog->loading.rows());
  for (std::size_t i = 0; i < cfg.tasks.size(); ++i)
    if (cfg.tasks[i].values && static_cast<std::size_t>(cfg.tasks[i].values->size()) != data_dim)
      config_fail(root + ".tasks[" + std::to_string(i) + "].values",
                  "has " + std::to_string(cfg.tasks[i].values->size()) + " entries, testbed data dimension is " +
                      std::to_string(data_dim));

  const json& samplers = require(j, root, "samplers");
  if (!samplers.is_array() || samplers.empty()) config_fail(root + ".samplers", "expected a non-empty array");
  names.clear();
  for (std::size_t i = 0; i < samplers.size(); ++i) {
    cfg.samplers.push_back(parse_sampler(samplers[i], root + ".samplers[" + std::to_string(i) + "]"));
    if (!names.insert(cfg.samplers.back().name).second)
      config_fail(root + ".samplers[" + std::to_string(i) + "].name", "duplicate sampler name");
  }

  if (j.contains("metrics")) {
    const json& m = j["metrics"];
    if (!m.is_array()) config_fail(root + ".metrics", "expected an array");
    for (std::size_t i = 0; i < m.size(); ++i) {
      const std::string p = root + ".metrics[" + std::to_string(i) + "]";
      const std::string name = get_string(m[i], p);
      if (name != "tv" && name != "energy" && name != "laplacian_mmd" && name != "sinkhorn" && name != "rmse_mae" &&
          name != "moments")
        config_fail(p, "expected tv | energy | laplacian_mmd | sinkhorn | rmse_mae | moments");
      cfg.metrics.push_back(name);
    }
  }
  if (j.contains("metric_options")) {
    const json& o = j["metric_options"];
    const std::string p = root + ".metric_options";
    check_keys(o, p, {"bins", "max_samples", "sinkhorn_reg", "sinkhorn_max_iters", "sinkhorn_tol", "mmd_sigma"});
    auto& mo = cfg.metric_options;
    if (o.contains("bins")) mo.bins = get_count(o["bins"], p + ".bins");
    if (o.contains("max_samples")) mo.max_samples = get_count(o["max_samples"], p + ".max_samples");
    if (o.contains("sinkhorn_reg")) mo.sinkhorn_reg = get_double(o["sinkhorn_reg"], p + ".sinkhorn_reg");
    if (o.contains("sinkhorn_max_iters")) mo.sinkhorn_max_iters = get_count(o["sinkhorn_max_iters"], p + ".sinkhorn_max_iters");
    if (o.contains("sinkhorn_tol")) mo.sinkhorn_tol = get_double(o["sinkhorn_tol"], p + ".sinkhorn_tol");
    if (o.contains("mmd_sigma")) mo.mmd_sigma = get_double(o["mmd_sigma"], p + ".mmd_sigma");
    if (mo.bins < 1) config_fail(p + ".bins", "must be >= 1");
    if (mo.max_samples < 2) config_fail(p + ".max_samples", "must be >= 2");
    if (mo.sinkhorn_reg && !(*mo.sinkhorn_reg > 0.0)) config_fail(p + ".sinkhorn_reg", "must be > 0");
    if (mo.mmd_sigma && !(*mo.mmd_sigma > 0.0)) config_fail(p + ".mmd_sigma", "must be > 0");
  }

  if (j.contains("seeds")) {
    const json& s = j["seeds"];
    if (!s.is_array() || s.empty()) config_fail(root + ".seeds", "expected a non-empty array of integers");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) cfg.seeds.push_back(get_u64(s[i], root + ".seeds[" + std::to_string(i) + "]"));
  }
  if (j.contains("output_dir")) cfg.output_dir = get_string(j["output_dir"], root + ".output_dir");
  if (j.contains("workers")) {
    cfg.workers = get_count(j["workers"], root + ".workers");
    if (cfg.workers < 1) config_fail(root + ".workers", "must be >= 1");
  }
  if (j.contains("budget")) {
    const json& b = j["budget"];
    const std::string p = root + ".budget";
    check_keys(b, p, {"mode", "evals"});
    cfg.budget.mode = get_string(require(b, p, "mode"), p + ".mode");
    if (cfg.budget.mode != "match-iterations" && cfg.budget.mode != "match-model-evals")
      config_fail(p + ".mode", "expected match-iterations | match-model-evals");
    if (b.contains("evals")) cfg.budget.evals = get_count(b["evals"], p + ".evals");
    if (cfg.budget.mode == "match-model-evals" && (!cfg.budget.evals || *cfg.budget.evals < 1))
      config_fail(p + ".evals", "required (>= 1) in match-model-evals mode");
  }

  // fixed initialisation needs a latent from the sampler or the task
  for (std::size_t i = 0; i < cfg.samplers.size(); ++i) {
    const auto& s = cfg.samplers[i];
    if (s.init.kind != "fixed" || s.init.z) continue;
    for (const auto& t : cfg.tasks)
      if (!t.init_z)
        config_fail(root + ".samplers[" + std::to_string(i) + "].init",
                    "fixed init needs init.z or init_z on task '" + t.name + "'");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Chain length or LAIR iteration count after applying the budget mode.
inline std::size_t effective_T(const ExperimentConfig& cfg, const SamplerConfig& s) {
  if (cfg.budget.mode != "match-model-evals") return s.T;
  const double evals = static_cast<double>(*cfg.budget.evals);
  if (s.kind == SamplerKind::kLair)
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(evals / static_cast<double>(s.K + s.R))));
  return *cfg.budget.evals;
}

}  // namespace condsamp
