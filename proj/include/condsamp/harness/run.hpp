#pragma once

// Experiment runner: tasks x samplers x seeds fanned out over a worker pool.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "condsamp/core/counting_model.hpp"
#include "condsamp/core/error.hpp"
#include "condsamp/core/masked_point.hpp"
#include "condsamp/core/model.hpp"
#include "condsamp/core/rng.hpp"
#include "condsamp/harness/config.hpp"
#include "condsamp/harness/io.hpp"
#include "condsamp/harness/logging.hpp"
#include "condsamp/lair/importance.hpp"
#include "condsamp/lair/lair.hpp"
#include "condsamp/metrics/metrics.hpp"
#include "condsamp/samplers/run_chain.hpp"
#include "condsamp/testbeds/grid_oracle.hpp"
#include "condsamp/testbeds/grid_vae.hpp"
#include "condsamp/testbeds/mog_linear.hpp"

#ifndef CONDSAMP_VERSION
#define CONDSAMP_VERSION "0.1.0"
#endif

namespace condsamp {

struct TaskInstance {
  std::string name;
  MaskedPoint point;
  bool has_truth = false;
  std::optional<Vector> init_z;
};

/// Exact one-dimensional marginal of a missing coordinate.
struct MarginalOracle {
  std::size_t coord = 0;
  std::pair<double, double> support;
  std::function<std::vector<double>(double, double, std::size_t)> masses;
  double mean = 0.0;
  double variance = 0.0;

  [[nodiscard]] std::pair<double, double> domain() const { return support; }
  [[nodiscard]] std::vector<double> bin_masses(double lo, double hi, std::size_t bins) const { return masses(lo, hi, bins); }
};

/// Ground truth for one task: per-coordinate marginals, an exact reference
/// sample of x_mis, and the CSV tables written under oracle/.
struct TaskOracle {
  std::vector<MarginalOracle> marginals;
  Matrix reference;
  std::string xmis_csv;
  std::optional<std::string> joint_csv;
  std::optional<std::string> z_csv;
};

struct TaskSetup {
  TaskInstance task;
  std::optional<TaskOracle> oracle;
  std::string oracle_error;
};

struct JobResult {
  std::string sampler;
  std::string sampler_kind;
  std::string task;
  std::uint64_t seed = 0;
  std::string status = "ok";  // ok | diverged | error
  std::string message;
  std::array<EvalCounts, 3> counts{};
  std::size_t iterations = 0;
  std::size_t K = 0, R = 0;
  std::size_t n_samples = 0;
  std::optional<double> acceptance_rate;
  std::size_t prior_proposals = 0;
  std::size_t degenerate_count = 0;
  std::optional<std::size_t> diverged_at;
  std::string trace_file;
  std::string archive_file;
  double seconds = 0.0;
  std::vector<MetricRecord> metrics;
};

struct BudgetCheck {
  std::string task;
  std::uint64_t seed = 0;
  std::string lair;
  std::string chain;
  std::size_t lair_evals = 0;
  std::size_t chain_evals = 0;
  std::size_t tolerance = 0;
  bool ok = true;
};

struct RunSummary {
  std::filesystem::path out_dir;
  std::vector<TaskSetup> tasks;
  std::vector<JobResult> jobs;
  std::vector<BudgetCheck> budget;
  int exit_code = 0;
};

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed_override;
  bool oracle_only = false;
};

namespace detail {

template <LatentModel M>
Vector sample_full_data(const M& model, Rng& rng) {
  const std::size_t d = model.data_dim();
  const MaskedPoint all_missing(Vector::Zero(static_cast<Eigen::Index>(d)), std::vector<bool>(d, false));
  const Vector z = model.sample_prior(rng);
  return model.sample_decoder_conditional(all_missing, z, rng);
}

template <LatentModel M>
TaskInstance make_task(const M& model, const TaskConfig& tc) {
  TaskInstance t;
  t.name = tc.name;
  t.init_z = tc.init_z;
  if (tc.values) {
    t.point = MaskedPoint(*tc.values, *tc.observed);
    return t;
  }
  const std::size_t d = model.data_dim();
  if (d < 2) throw ConfigError("task '" + tc.name + "': generated tasks need a data dimension >= 2");
  Rng rng(*tc.generate_seed);
  const Vector x = sample_full_data(model, rng);
  std::vector<bool> observed(d);
  std::size_t n_mis = 0;
  for (std::size_t i = 0; i < d; ++i) {
    observed[i] = !rng.bernoulli(*tc.missing_fraction);
    n_mis += observed[i] ? 0 : 1;
  }
  if (n_mis == 0) observed[rng.index(d)] = false;
  if (n_mis == d) observed[rng.index(d)] = true;
  t.point = MaskedPoint(x, std::move(observed));
  t.has_truth = true;
  return t;
}

inline std::string marginal_table_csv(const std::vector<std::pair<std::size_t, std::vector<std::pair<double, double>>>>& cols) {
  CsvWriter w({"coord", "x_mis", "density"});
  for (const auto& [coord, pts] : cols)
    for (const auto& [x, d] : pts) {
      w.cell(coord).cell(x).cell(d);
      w.end_row();
    }
  return w.str();
}

inline TaskOracle grid_task_oracle(const GridVaeModel& model, const MaskedPoint& point, const ExperimentConfig& cfg,
                                   Rng rng) {
  auto g = std::make_shared<GridOracle>(model, point, cfg.oracle_grid);
  TaskOracle o;
  MarginalOracle m;
  m.coord = point.missing_indices()[0];
  m.support = g->domain();
  m.masses = [g](double lo, double hi, std::size_t bins) { return g->bin_masses(lo, hi, bins); };
  m.mean = g->xmis_mean();
  m.variance = g->xmis_variance();
  o.marginals.push_back(std::move(m));

  const std::size_t n_ref = cfg.metric_options.max_samples;
  o.reference.resize(static_cast<Eigen::Index>(n_ref), 1);
  for (std::size_t i = 0; i < n_ref; ++i) o.reference(static_cast<Eigen::Index>(i), 0) = g->sample(rng).first;

  const auto& xg = g->x_grid();
  const auto& zg = g->z_grid();
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < xg.size(); ++i) pts.emplace_back(xg.node(i), g->xmis_density()[i]);
  o.xmis_csv = marginal_table_csv({{point.missing_indices()[0], std::move(pts)}});

  CsvWriter zw({"z", "density"});
  for (std::size_t j = 0; j < zg.size(); ++j) {
    zw.cell(zg.node(j)).cell(g->z_density()[j]);
    zw.end_row();
  }
  o.z_csv = zw.str();

  CsvWriter jw({"x_mis", "z", "density"});
  const std::size_t s = cfg.joint_stride;
  for (std::size_t i = 0; i < xg.size(); i += s)
    for (std::size_t j = 0; j < zg.size(); j += s) {
      jw.cell(xg.node(i)).cell(zg.node(j)).cell(g->joint(i, j));
      jw.end_row();
    }
  o.joint_csv = jw.str();
  return o;
}

inline TaskOracle mog_task_oracle(const MogLinearModel& model, const MaskedPoint& point, const ExperimentConfig& cfg,
                                  Rng rng) {
  const GaussianMixture cond = model.exact_conditional(point);
  const Matrix cov = cond.covariance();
  const Vector mean = cond.mean();
  TaskOracle o;
  std::vector<std::pair<std::size_t, std::vector<std::pair<double, double>>>> cols;
  const auto& mis = point.missing_indices();
  for (std::size_t j = 0; j < mis.size(); ++j) {
    auto marg = std::make_shared<GaussianMixture>(cond.marginal(static_cast<Eigen::Index>(j)));
    MarginalOracle m;
    m.coord = mis[j];
    m.support = marg->domain();
    m.masses = [marg](double lo, double hi, std::size_t bins) { return marg->bin_masses(lo, hi, bins); };
    m.mean = mean[static_cast<Eigen::Index>(j)];
    m.variance = cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    std::vector<std::pair<double, double>> pts;
    const std::size_t n = cfg.oracle_grid.n_x;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = m.support.first + (m.support.second - m.support.first) * static_cast<double>(i) / static_cast<double>(n - 1);
      pts.emplace_back(x, std::exp(marg->log_density(Vector::Constant(1, x))));
    }
    cols.emplace_back(mis[j], std::move(pts));
    o.marginals.push_back(std::move(m));
  }
  o.xmis_csv = marginal_table_csv(cols);
  const std::size_t n_ref = cfg.metric_options.max_samples;
  o.reference.resize(static_cast<Eigen::Index>(n_ref), static_cast<Eigen::Index>(mis.size()));
  for (std::size_t i = 0; i < n_ref; ++i) o.reference.row(static_cast<Eigen::Index>(i)) = cond.sample(rng).transpose();
  return o;
}

inline std::optional<TaskOracle> task_oracle(const GridVaeModel& model, const MaskedPoint& point,
                                             const ExperimentConfig& cfg, Rng rng) {
  if (model.data_dim() != 2 || point.n_missing() != 1) return std::nullopt;
  return grid_task_oracle(model, point, cfg, rng);
}

inline std::optional<TaskOracle> task_oracle(const MogLinearModel& model, const MaskedPoint& point,
                                             const ExperimentConfig& cfg, Rng rng) {
  return mog_task_oracle(model, point, cfg, rng);
}

/// Evenly spaced rows, at most `k` of them.
inline SampleCloud subsample(const Matrix& pts, std::size_t k) {
  const auto n = static_cast<std::size_t>(pts.rows());
  if (n <= k) return SampleCloud(pts);
  Matrix out(static_cast<Eigen::Index>(k), pts.cols());
  for (std::size_t i = 0; i < k; ++i) out.row(static_cast<Eigen::Index>(i)) = pts.row(static_cast<Eigen::Index>(i * n / k));
  return SampleCloud(std::move(out));
}

inline MetricRecord metric_record(std::string name, double value, std::size_t n_x, std::size_t n_y,
                                  const JobResult& job) {
  MetricRecord r;
  r.metric_name = std::move(name);
  r.value = value;
  r.n_x = n_x;
  r.n_y = n_y;
  r.labels = {{"sampler", job.sampler}, {"task", job.task}};
  r.params = {{"seed", static_cast<double>(job.seed)}};
  return r;
}

/// Metrics of imputations `x` (one row per sample, columns in missing order).
inline void compute_metrics(const ExperimentConfig& cfg, const Matrix& x, const TaskSetup& setup, JobResult& job) {
  if (cfg.metrics.empty() || x.rows() == 0) return;
  const auto& mo = cfg.metric_options;
  const auto log = harness_logger();
  const auto n = static_cast<std::size_t>(x.rows());
  for (const std::string& name : cfg.metrics) {
    if (name == "rmse_mae") {
      if (!setup.task.has_truth) {
        log->debug("task '{}' has no ground truth; skipping rmse_mae", setup.task.name);
        continue;
      }
      std::vector<std::vector<double>> per_entry(static_cast<std::size_t>(x.cols()));
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index i = 0; i < x.rows(); ++i) per_entry[static_cast<std::size_t>(c)].push_back(x(i, c));
      const Vector truth = setup.task.point.missing_values();
      const auto e = pointwise_errors(per_entry, std::vector<double>(truth.data(), truth.data() + truth.size()));
      job.metrics.push_back(metric_record("rmse", e.rmse, n, e.entries, job));
      job.metrics.push_back(metric_record("mae", e.mae, n, e.entries, job));
      continue;
    }
    if (!setup.oracle) {
      log->debug("task '{}' has no oracle; skipping {}", setup.task.name, name);
      continue;
    }
    const TaskOracle& o = *setup.oracle;
    if (name == "tv") {
      for (std::size_t j = 0; j < o.marginals.size(); ++j) {
        const auto cloud = SampleCloud(Matrix(x.col(static_cast<Eigen::Index>(j))));
        auto r = metric_record("tv", tv_grid(cloud, o.marginals[j], mo.bins), n, mo.bins, job);
        r.params.emplace_back("bins", static_cast<double>(mo.bins));
        r.params.emplace_back("coord", static_cast<double>(o.marginals[j].coord));
        job.metrics.push_back(std::move(r));
      }
    } else if (name == "moments") {
      for (std::size_t j = 0; j < o.marginals.size(); ++j) {
        const Vector col = x.col(static_cast<Eigen::Index>(j));
        const double m = col.mean();
        const double v = (col.array() - m).square().mean();
        auto r1 = metric_record("mean_abs_error", std::abs(m - o.marginals[j].mean), n, 0, job);
        auto r2 = metric_record("variance_rel_error", std::abs(v / o.marginals[j].variance - 1.0), n, 0, job);
        for (auto* r : {&r1, &r2}) r->params.emplace_back("coord", static_cast<double>(o.marginals[j].coord));
        job.metrics.push_back(std::move(r1));
        job.metrics.push_back(std::move(r2));
      }
    } else {
      const SampleCloud xs = subsample(x, mo.max_samples);
      const SampleCloud ref(o.reference);
      if (name == "energy") {
        const auto e = energy_distance(xs, ref);
        auto r = metric_record("energy", e.distance, xs.size(), ref.size(), job);
        r.params.emplace_back("statistic", e.statistic);
        job.metrics.push_back(std::move(r));
      } else if (name == "laplacian_mmd") {
        const double sigma = mo.mmd_sigma.value_or(median_l1_bandwidth(xs, ref));
        auto r = metric_record("laplacian_mmd", laplacian_mmd(xs, ref, sigma), xs.size(), ref.size(), job);
        r.params.emplace_back("sigma", sigma);
        job.metrics.push_back(std::move(r));
      } else if (name == "sinkhorn") {
        const auto s = sinkhorn_distance(xs, ref, {mo.sinkhorn_reg, mo.sinkhorn_max_iters, mo.sinkhorn_tol});
        auto r = metric_record("sinkhorn", s.cost, xs.size(), ref.size(), job);
        r.params.emplace_back("reg", s.reg);
        r.params.emplace_back("iterations", static_cast<double>(s.iterations));
        r.params.emplace_back("marginal_error", s.marginal_error);
        r.converged = s.converged;
        job.metrics.push_back(std::move(r));
      }
    }
  }
}

inline InitStrategy to_init(const InitConfig& ic, const TaskInstance& task) {
  if (ic.kind == "fixed") return InitStrategy::fixed(ic.z ? *ic.z : *task.init_z);
  if (ic.kind == "pseudo-gibbs-warmup") return InitStrategy::pseudo_gibbs_warmup(ic.n);
  if (ic.kind == "lair-warmup") return InitStrategy::lair_warmup(ic.n, ic.K, ic.R);
  return InitStrategy::marginal();
}

inline std::string job_stem(const JobResult& j) {
  return j.sampler + "__" + j.task + "__seed" + std::to_string(j.seed);
}

inline Matrix rows_to_matrix(const std::vector<const Vector*>& rows, std::size_t cols) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i]->transpose();
  return m;
}

template <LatentModel M>
void run_job(const ExperimentConfig& cfg, const M& model, const TaskSetup& setup, const SamplerConfig& sc,
             const std::filesystem::path& out, JobResult& job) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  CountingModel<M> cm(model);
  const MaskedPoint& point = setup.task.point;
  const Rng rng = Rng(job.seed).split(setup.task.name).split(sc.name);
  const std::size_t T = effective_T(cfg, sc);
  job.iterations = T;
  const std::size_t n_mis = point.n_missing();
  const fs::path trace_path = out / "traces" / (job_stem(job) + ".csv");
  Matrix cloud;

  if (sc.kind == SamplerKind::kStandardIr) {
    Rng r = rng.split("ir");
    cm.set_phase(EvalPhase::kSampling);
    IrResult ir = sc.proposal == "exact-posterior"
                      ? standard_ir(cm, point, sc.M, cm.exact_posterior(point), r, sc.resampling)
                      : standard_ir(cm, point, sc.M, PriorDensity<CountingModel<M>>(cm), r, sc.resampling);
    write_file_atomic(trace_path, ir_samples_csv(ir, point, model.latent_dim()));
    std::vector<const Vector*> rows;
    for (const auto& v : ir.imputations) rows.push_back(&v);
    cloud = rows_to_matrix(rows, n_mis);
  } else if (sc.kind == SamplerKind::kLair) {
    job.K = sc.K;
    job.R = sc.R;
    LairConfig lc{sc.K, sc.R, T, sc.resampling, sc.n_out};
    lc.validate();
    cm.set_phase(EvalPhase::kInit);
    Rng init_rng = rng.split("init");
    ParticleSet ps = lair_init(cm, point, sc.K, sc.R, init_rng);
    cm.set_phase(EvalPhase::kSampling);
    Rng it_rng = rng.split("iterations");
    ParticleArchive archive;
    for (std::size_t t = 0; t < T; ++t) archive.append(lair_iteration(cm, point, ps, it_rng, sc.resampling));
    cm.set_phase(EvalPhase::kFinalize);
    Rng fin_rng = rng.split("finalize");
    const auto samples = lair_finalize(archive, lc.n_out.value_or(T * sc.K), cm, point, fin_rng, sc.resampling);
    write_file_atomic(trace_path, lair_samples_csv(samples, point, model.latent_dim()));
    const fs::path arch_path = out / "archives" / (job_stem(job) + ".csv");
    write_file_atomic(arch_path, archive_csv(archive, model.latent_dim()));
    job.archive_file = fs::relative(arch_path, out).string();
    std::vector<const Vector*> rows;
    for (const auto& s : samples) rows.push_back(&s.x_mis);
    cloud = rows_to_matrix(rows, n_mis);
  } else {
    ChainConfig cc;
    cc.kind = sc.kind == SamplerKind::kPseudoGibbs ? ChainKind::kPseudoGibbs
              : sc.kind == SamplerKind::kMwg      ? ChainKind::kMwg
                                                  : ChainKind::kAcMwg;
    cc.T = T;
    cc.epsilon = sc.epsilon;
    cc.clip = sc.clip;
    cc.thin = sc.thin;
    cc.burn_in = sc.burn_in;
    cc.history_window = sc.history_window;
    cc.init = to_init(sc.init, setup.task);
    struct PhaseHooks : ChainHooks {
      CountingModel<M>* m;
      explicit PhaseHooks(CountingModel<M>* mm) : m(mm) {}
      void on_init_done() override { m->set_phase(EvalPhase::kSampling); }
    } hooks(&cm);
    cm.set_phase(EvalPhase::kInit);
    const ChainTrace trace = run_chain(cm, point, cc, rng, &hooks);
    write_file_atomic(trace_path, chain_trace_csv(trace, point, model.latent_dim()));
    job.acceptance_rate = trace.acceptance_rate();
    job.prior_proposals = trace.prior_proposals;
    job.degenerate_count = trace.degenerate_count;
    if (trace.diverged) {
      job.status = "diverged";
      job.diverged_at = trace.diverged_at;
      job.message = "non-finite imputation at step " + std::to_string(trace.diverged_at);
    }
    std::vector<const Vector*> rows;
    for (const auto* r : trace.post_burn_in()) rows.push_back(&r->x_mis);
    cloud = rows_to_matrix(rows, n_mis);
  }
  job.trace_file = fs::relative(trace_path, out).string();
  job.n_samples = static_cast<std::size_t>(cloud.rows());
  for (std::size_t p = 0; p < 3; ++p) job.counts[p] = cm.counts(static_cast<EvalPhase>(p));
  if (job.status == "ok") compute_metrics(cfg, cloud, setup, job);
  job.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline nlohmann::json counts_json(const EvalCounts& c) {
  return {{"decoder_passes", c.decoder_passes},
          {"decoder_log_lik_calls", c.decoder_log_lik_calls},
          {"decoder_samples", c.decoder_samples},
          {"encoder_calls", c.encoder_calls},
          {"prior_evals", c.prior_evals}};
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

inline nlohmann::json metrics_json(const std::vector<MetricRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : r.labels) params[k] = v;
    for (const auto& [k, v] : r.params) {
      if (k == "seed" || k == "coord" || k == "bins" || k == "iterations")
        params[k] = static_cast<std::uint64_t>(v);
      else
        params[k] = v;
    }
    arr.push_back({{"metric_name", r.metric_name},
                   {"value", r.value},
                   {"n_x", r.n_x},
                   {"n_y", r.n_y},
                   {"params", params},
                   {"converged", r.converged}});
  }
  return arr;
}

inline std::string config_hash(const ExperimentConfig& cfg) { return hex64(fnv1a64(cfg.raw.dump())); }

/// Pairs every LAIR job with every single-chain job on the same task and seed
/// and compares sampling-phase decoder passes.
inline std::vector<BudgetCheck> budget_checks(const std::vector<JobResult>& jobs) {
  std::vector<BudgetCheck> out;
  for (const auto& l : jobs) {
    if (l.sampler_kind != "lair" || l.status == "error") continue;
    for (const auto& c : jobs) {
      if (c.task != l.task || c.seed != l.seed || c.status == "error") continue;
      if (c.sampler_kind != "pseudo-gibbs" && c.sampler_kind != "mwg" && c.sampler_kind != "ac-mwg") continue;
      BudgetCheck b{l.task, l.seed, l.sampler, c.sampler,
                    l.counts[static_cast<std::size_t>(EvalPhase::kSampling)].decoder_passes,
                    c.counts[static_cast<std::size_t>(EvalPhase::kSampling)].decoder_passes, l.K + l.R, true};
      const auto diff = b.lair_evals > b.chain_evals ? b.lair_evals - b.chain_evals : b.chain_evals - b.lair_evals;
      b.ok = diff <= b.tolerance;
      out.push_back(std::move(b));
    }
  }
  return out;
}

inline nlohmann::json manifest_json(const ExperimentConfig& cfg, const RunSummary& s) {
  using nlohmann::json;
  json tasks = json::array();
  for (const auto& t : s.tasks) {
    json jt{{"name", t.task.name},
            {"observed", t.task.point.mask()},
            {"values", std::vector<double>(t.task.point.values().data(),
                                           t.task.point.values().data() + t.task.point.values().size())},
            {"has_truth", t.task.has_truth},
            {"oracle", t.oracle.has_value()}};
    if (t.oracle) {
      json files = json::array({"oracle/" + t.task.name + ".xmis.csv"});
      if (t.oracle->joint_csv) files.push_back("oracle/" + t.task.name + ".joint.csv");
      if (t.oracle->z_csv) files.push_back("oracle/" + t.task.name + ".z.csv");
      jt["oracle_files"] = files;
    }
    if (!t.oracle_error.empty()) jt["oracle_error"] = t.oracle_error;
    tasks.push_back(jt);
  }
  json jobs = json::array();
  for (const auto& j : s.jobs) {
    json jj{{"sampler", j.sampler},
            {"kind", j.sampler_kind},
            {"task", j.task},
            {"seed", j.seed},
            {"status", j.status},
            {"iterations", j.iterations},
            {"n_samples", j.n_samples},
            {"trace", j.trace_file},
            {"seconds", j.seconds},
            {"evals", {{"init", detail::counts_json(j.counts[0])},
                       {"sampling", detail::counts_json(j.counts[1])},
                       {"finalize", detail::counts_json(j.counts[2])}}}};
    if (!j.message.empty()) jj["message"] = j.message;
    if (j.acceptance_rate) {
      jj["acceptance_rate"] = *j.acceptance_rate;
      jj["degenerate_steps"] = j.degenerate_count;
      jj["prior_proposals"] = j.prior_proposals;
    }
    if (j.diverged_at) jj["diverged_at"] = *j.diverged_at;
    if (!j.archive_file.empty()) jj["archive"] = j.archive_file;
    jobs.push_back(jj);
  }
  json burn = json::object();
  for (const auto& sc : cfg.samplers)
    if (sc.kind != SamplerKind::kLair && sc.kind != SamplerKind::kStandardIr)
      burn[sc.name] = sc.burn_in.value_or(effective_T(cfg, sc) / 10);
  json budget{{"mode", cfg.budget.mode}};
  if (cfg.budget.evals) budget["evals"] = *cfg.budget.evals;
  json checks = json::array();
  for (const auto& b : s.budget)
    checks.push_back({{"task", b.task}, {"seed", b.seed}, {"lair", b.lair}, {"chain", b.chain},
                      {"lair_decoder_passes", b.lair_evals}, {"chain_decoder_passes", b.chain_evals},
                      {"tolerance", b.tolerance}, {"ok", b.ok}});
  budget["checks"] = checks;
  return {{"name", cfg.name},
          {"config_hash", config_hash(cfg)},
          {"schema_version", cfg.schema_version},
          {"library_version", CONDSAMP_VERSION},
          {"timestamp", detail::utc_timestamp()},
          {"testbed", cfg.testbed_kind},
          {"seeds", cfg.seeds},
          {"burn_in", burn},
          {"budget", budget},
          {"tasks", tasks},
          {"jobs", jobs},
          {"metrics_file", cfg.metrics.empty() ? json(nullptr) : json("metrics.json")},
          {"config", cfg.raw}};
}

template <LatentModel M>
RunSummary run_experiment_with(const ExperimentConfig& cfg, const M& model, const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  const auto log = harness_logger();
  RunSummary s;
  s.out_dir = opt.out_dir.value_or(cfg.output_dir);
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (opt.seed_override) seeds = {*opt.seed_override};

  for (std::size_t i = 0; i < cfg.tasks.size(); ++i) {
    const TaskConfig& tc = cfg.tasks[i];
    const std::string path = "config.tasks[" + std::to_string(i) + "]";
    TaskSetup setup;
    setup.task = detail::make_task(model, tc);
    if (tc.init_z && static_cast<std::size_t>(tc.init_z->size()) != model.latent_dim())
      throw ConfigError(path + ".init_z: has " + std::to_string(tc.init_z->size()) + " entries, latent dimension is " +
                        std::to_string(model.latent_dim()));
    s.tasks.push_back(std::move(setup));
  }
  for (std::size_t i = 0; i < cfg.samplers.size(); ++i) {
    const auto& ic = cfg.samplers[i].init;
    if (ic.z && static_cast<std::size_t>(ic.z->size()) != model.latent_dim())
      throw ConfigError("config.samplers[" + std::to_string(i) + "].init.z: has " + std::to_string(ic.z->size()) +
                        " entries, latent dimension is " + std::to_string(model.latent_dim()));
  }

  fs::create_directories(s.out_dir);
  {
    for (auto& t : s.tasks) {
      try {
        t.oracle = detail::task_oracle(model, t.task.point, cfg, Rng(fnv1a64(t.task.name)).split("oracle"));
      } catch (const Error& e) {
        t.oracle_error = e.what();
        log->error("oracle for task '{}': {}", t.task.name, e.what());
        continue;
      }
      if (!t.oracle) {
        log->info("no closed-form oracle for task '{}'", t.task.name);
        continue;
      }
      const fs::path dir = s.out_dir / "oracle";
      write_file_atomic(dir / (t.task.name + ".xmis.csv"), t.oracle->xmis_csv);
      if (t.oracle->joint_csv) write_file_atomic(dir / (t.task.name + ".joint.csv"), *t.oracle->joint_csv);
      if (t.oracle->z_csv) write_file_atomic(dir / (t.task.name + ".z.csv"), *t.oracle->z_csv);
    }
  }
  for (const auto& t : s.tasks) {
    if (!t.oracle_error.empty()) s.exit_code = 2;
    const bool wants_truth = std::find(cfg.metrics.begin(), cfg.metrics.end(), "rmse_mae") != cfg.metrics.end();
    if (wants_truth && !t.task.has_truth) log->warn("task '{}' has no ground truth; rmse_mae is skipped", t.task.name);
  }
  if (opt.oracle_only) return s;

  struct JobSpec {
    std::size_t task, sampler;
    std::uint64_t seed;
  };
  std::vector<JobSpec> specs;
  for (std::size_t si = 0; si < cfg.samplers.size(); ++si)
    for (std::size_t ti = 0; ti < s.tasks.size(); ++ti)
      for (std::uint64_t seed : seeds) specs.push_back({ti, si, seed});
  s.jobs.resize(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& j = s.jobs[i];
    j.sampler = cfg.samplers[specs[i].sampler].name;
    j.sampler_kind = sampler_kind_name(cfg.samplers[specs[i].sampler].kind);
    j.task = s.tasks[specs[i].task].task.name;
    j.seed = specs[i].seed;
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      JobResult& job = s.jobs[i];
      try {
        detail::run_job(cfg, model, s.tasks[specs[i].task], cfg.samplers[specs[i].sampler], s.out_dir, job);
        log->info("{} {} seed {}: {} ({:.2f} s)", job.sampler, job.task, job.seed, job.status, job.seconds);
      } catch (const std::exception& e) {
        job.status = "error";
        job.message = e.what();
        log->error("{} {} seed {}: {}", job.sampler, job.task, job.seed, e.what());
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(opt.workers.value_or(cfg.workers), specs.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
  }

  for (const auto& j : s.jobs)
    if (j.status == "error") s.exit_code = 2;
  if (cfg.budget.mode == "match-model-evals") {
    s.budget = budget_checks(s.jobs);
    for (const auto& b : s.budget)
      if (!b.ok)
        log->warn("budget mismatch on {} seed {}: {} used {} decoder passes, {} used {}", b.task, b.seed, b.lair,
                  b.lair_evals, b.chain, b.chain_evals);
  }

  if (!cfg.metrics.empty()) {
    std::vector<MetricRecord> all;
    for (const auto& j : s.jobs)
      for (const auto& r : j.metrics) all.push_back(r);
    write_file_atomic(s.out_dir / "metrics.json", metrics_json(all).dump(2) + "\n");
  }
  write_file_atomic(s.out_dir / "manifest.json", manifest_json(cfg, s).dump(2) + "\n");
  return s;
}

/// Builds the configured testbed and runs every job.
inline RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  if (cfg.grid) {
    const GridVaeModel model(*cfg.grid);
    return run_experiment_with(cfg, model, opt);
  }
  const MogLinearModel model(*cfg.mog);
  return run_experiment_with(cfg, model, opt);
}

}  // namespace condsamp
