// condsamp: run conditional-sampling experiments from a JSON config.
//
//   condsamp run --config cfg.json [--out dir] [--workers n] [--seed-override s]
//   condsamp oracle --config cfg.json [--out dir]
//   condsamp metrics <trace.csv> <oracle.xmis.csv> [--bins 64] [--burn-in 0] [--out metrics.json]
//   condsamp doctor
//
// Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "condsamp/core/error.hpp"
#include "condsamp/harness/config.hpp"
#include "condsamp/harness/doctor.hpp"
#include "condsamp/harness/io.hpp"
#include "condsamp/harness/logging.hpp"
#include "condsamp/harness/run.hpp"
#include "condsamp/metrics/metrics.hpp"

namespace {

using namespace condsamp;

int cmd_run(const std::string& config, const RunOptions& opt) {
  const ExperimentConfig cfg = load_config(config);
  const RunSummary s = run_experiment(cfg, opt);
  std::size_t failed = 0, diverged = 0;
  for (const auto& j : s.jobs) {
    failed += j.status == "error";
    diverged += j.status == "diverged";
  }
  if (opt.oracle_only) {
    std::cout << "wrote oracle tables for " << s.tasks.size() << " task(s) to " << (s.out_dir / "oracle").string() << "\n";
  } else {
    std::cout << s.jobs.size() << " job(s): " << s.jobs.size() - failed - diverged << " ok, " << diverged
              << " diverged, " << failed << " failed; output in " << s.out_dir.string() << "\n";
  }
  return s.exit_code;
}

int cmd_metrics(const std::string& trace_path, const std::string& oracle_path, std::size_t bins, std::size_t burn_in,
                const std::string& out) {
  const CsvTable trace = read_csv(trace_path);
  const auto oracle = read_oracle_xmis(oracle_path);
  const auto cols = prefixed_columns(trace, "xmis_");
  std::set<std::size_t> trace_coords, oracle_coords;
  for (const auto& [c, i] : cols) trace_coords.insert(c);
  for (const auto& [c, d] : oracle) oracle_coords.insert(c);
  if (cols.empty()) throw UsageError("trace '" + trace_path + "' has no xmis_* columns");
  if (trace_coords != oracle_coords)
    throw UsageError("dimension mismatch: trace has " + std::to_string(trace_coords.size()) +
                     " missing coordinate(s), oracle has " + std::to_string(oracle_coords.size()));
  const auto t_col = trace.column("t");
  std::vector<MetricRecord> records;
  for (const auto& [coord, col] : cols) {
    std::vector<double> xs;
    for (const auto& row : trace.rows) {
      if (t_col >= 0 && row[static_cast<std::size_t>(t_col)] <= static_cast<double>(burn_in)) continue;
      xs.push_back(row[col]);
    }
    if (xs.empty()) throw UsageError("no trace rows left after burn-in");
    MetricRecord r;
    r.metric_name = "tv";
    r.value = tv_grid(SampleCloud::from_scalars(xs), oracle.at(coord), bins);
    r.n_x = xs.size();
    r.n_y = bins;
    r.labels = {{"trace", trace_path}, {"oracle", oracle_path}};
    r.params = {{"bins", static_cast<double>(bins)}, {"coord", static_cast<double>(coord)}};
    records.push_back(std::move(r));
  }
  const std::string text = metrics_json(records).dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    write_file_atomic(out, text);
  return 0;
}

int cmd_doctor() {
  int failed = 0;
  for (const auto& c : run_doctor()) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.passed && !c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << "\n";
    failed += c.passed ? 0 : 1;
  }
  return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional sampling for latent-variable generative models"};
  app.set_version_flag("--version", std::string(CONDSAMP_VERSION));
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed_override;

  auto* run = app.add_subcommand("run", "Run every task x sampler x seed job in a config");
  run->add_option("config_pos", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  run->add_option("--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--seed-override", seed_override, "Run a single seed instead of the configured list");

  auto* oracle = app.add_subcommand("oracle", "Write the oracle tables of a config only");
  oracle->add_option("config_pos", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  oracle->add_option("--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  oracle->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  std::string trace_path, oracle_path, metrics_out;
  std::size_t bins = 64, burn_in = 0;
  auto* metrics = app.add_subcommand("metrics", "Recompute TV of a trace against an oracle x_mis table");
  metrics->add_option("trace", trace_path, "Trace CSV")->required()->check(CLI::ExistingFile);
  metrics->add_option("oracle", oracle_path, "Oracle *.xmis.csv")->required()->check(CLI::ExistingFile);
  metrics->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);
  metrics->add_option("--burn-in", burn_in, "Drop chain rows with t <= burn-in");
  metrics->add_option("--out", metrics_out, "Write the report here instead of stdout");

  auto* doctor = app.add_subcommand("doctor", "Run built-in closed-form self-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto log = harness_logger();
  try {
    if (run->parsed() || oracle->parsed()) {
      if (config.empty()) throw UsageError("a config file is required (--config <path>)");
      RunOptions opt;
      opt.out_dir = out_dir;
      opt.workers = workers;
      opt.seed_override = seed_override;
      opt.oracle_only = oracle->parsed();
      return cmd_run(config, opt);
    }
    if (metrics->parsed()) return cmd_metrics(trace_path, oracle_path, bins, burn_in, metrics_out);
    if (doctor->parsed()) return cmd_doctor();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
