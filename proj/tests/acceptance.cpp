// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "json.hpp"

#include "condsamp/lair/importance.hpp"
#include "condsamp/lair/lair.hpp"
#include "condsamp/metrics/metrics.hpp"
#include "condsamp/samplers/doeblin.hpp"
#include "condsamp/samplers/run_chain.hpp"
#include "condsamp/testbeds/grid_oracle.hpp"
#include "condsamp/testbeds/grid_vae.hpp"
#include "condsamp/testbeds/mog_linear.hpp"
#include "test_models.hpp"

namespace {

using namespace condsamp;
namespace fs = std::filesystem;
using testing::vec;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

std::vector<double> xmis0(const ChainTrace& tr) {
  std::vector<double> xs;
  for (const auto* r : tr.post_burn_in()) xs.push_back(r->x_mis[0]);
  return xs;
}

std::vector<double> xmis0(const std::vector<LairSample>& samples) {
  std::vector<double> xs;
  for (const auto& s : samples) xs.push_back(s.x_mis[0]);
  return xs;
}

double tv64(const std::vector<double>& xs, const auto& oracle) {
  return tv_grid(SampleCloud::from_scalars(xs), oracle, 64);
}

ChainConfig chain_config(ChainKind kind, std::size_t T, double eps = 0.05,
                         InitStrategy init = InitStrategy::marginal()) {
  ChainConfig c;
  c.kind = kind;
  c.T = T;
  c.epsilon = eps;
  c.init = std::move(init);
  return c;
}

// Long MoG chain against the closed-form conditional: mean, variance and TV.
void check_mog_chain(Outcome& out, const MogLinearModel& model, ChainKind kind, double eps, bool every_step_accepts) {
  const auto t0 = std::chrono::steady_clock::now();
  const MaskedPoint point = testing::mog_point();
  const GaussianMixture oracle = model.exact_conditional(point);
  const ChainTrace tr = run_chain(model, point, chain_config(kind, 200000, eps), Rng(2024));
  const double secs = seconds_since(t0);

  const auto xs = xmis0(tr);
  const auto bm = testing::batch_means(xs);
  const double m0 = oracle.mean()[0], v0 = oracle.covariance()(0, 0);
  const double v = variance(xs);
  const double tv = tv64(xs, oracle);
  out.detail << "mean " << bm.mean << " vs " << m0 << " (3se " << 3.0 * bm.se << "), var " << v << " vs " << v0
             << ", tv " << tv << ", " << secs << " s";
  if (every_step_accepts) {
    double min_log_ratio = std::numeric_limits<double>::infinity();
    for (const auto& r : tr.records)
      if (r.t > 0) min_log_ratio = std::min(min_log_ratio, r.log_accept_ratio);
    out.detail << ", min log ratio " << min_log_ratio << ", acceptance " << tr.acceptance_rate();
    out.require(min_log_ratio >= std::log1p(-1e-8), "every ratio >= 1 - 1e-8");
    out.require(tr.acceptance_rate() == 1.0, "all proposals accepted");
  }
  out.require(std::abs(bm.mean - m0) <= 3.0 * bm.se, "mean within 3 MC SE");
  out.require(std::abs(v - v0) <= 0.1 * v0, "variance within 10%");
  out.require(tv < 0.05, "TV < 0.05");
  out.require(secs < 60.0, "runtime < 60 s");
}

void exact_gibbs(Outcome& out) {
  check_mog_chain(out, MogLinearModel(testing::mog_config()), ChainKind::kMwg, 0.05, true);
}

void acmwg_stationarity(Outcome& out) {
  check_mog_chain(out, MogLinearModel(testing::mog_config(EncoderPerturbation::widened(2.0))), ChainKind::kAcMwg, 0.05,
                  false);
}

InitStrategy panel_init(const GridVaeModel& m, const testing::Panel& p) {
  return InitStrategy::fixed(vec({testing::plateau_centre(m, p.init_mode)}));
}

double fraction_in(const GridVaeModel& m, const ChainTrace& tr, std::size_t mode, bool inside) {
  const auto post = tr.post_burn_in();
  std::size_t n = 0;
  for (const auto* r : post) n += (m.mode_of(r->z[0]) == mode) == inside;
  return static_cast<double>(n) / static_cast<double>(post.size());
}

void pitfalls(Outcome& out) {
  const GridVaeModel m(testing::pitfall_grid_config());
  const auto panels = testing::pitfall_panels();
  for (std::size_t pi : {0u, 2u}) {
    const GridOracle o(m, panels[pi].point, {});
    const auto [a, b] = m.mode_interval(panels[pi].init_mode);
    const double complement = 1.0 - o.z_mass(a, b);
    out.detail << "panel" << pi + 1 << " oracle complement " << complement << "; ";
    out.require(complement >= 0.4, "oracle complement mass >= 0.4 on panel " + std::to_string(pi + 1));
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::array<double, 3> mwg_left{}, pg_other{};
    for (std::size_t pi = 0; pi < 3; ++pi) {
      const auto& p = panels[pi];
      const ChainTrace mwg = run_chain(m, p.point, chain_config(ChainKind::kMwg, 50000, 0.05, panel_init(m, p)), Rng(seed));
      const ChainTrace pg =
          run_chain(m, p.point, chain_config(ChainKind::kPseudoGibbs, 50000, 0.05, panel_init(m, p)), Rng(seed));
      mwg_left[pi] = fraction_in(m, mwg, p.init_mode, false);
      pg_other[pi] = fraction_in(m, pg, p.other_mode, true);
    }
    out.detail << "seed" << seed << " mwg-left " << mwg_left[0] << "/" << mwg_left[2] << " pg-other " << pg_other[0] << "/"
               << pg_other[1] << "; ";
    const std::string s = " (seed " + std::to_string(seed) + ")";
    out.require(mwg_left[0] < 0.001 && mwg_left[2] < 0.001, "MWG leaves initial interval < 0.1% on panels 1, 3" + s);
    out.require(pg_other[0] > 0.1, "pseudo-Gibbs reaches the other mode on panel 1" + s);
    out.require(pg_other[1] < 0.01, "pseudo-Gibbs misses the other mode on panel 2" + s);
  }
}

void remedies(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const GridVaeModel m(testing::pitfall_grid_config());
  const auto panels = testing::pitfall_panels();
  for (std::size_t pi = 0; pi < 3; ++pi) {
    const auto& p = panels[pi];
    const GridOracle o(m, p.point, {});
    std::vector<double> tv_mwg, tv_ac, tv_lair;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      tv_mwg.push_back(tv64(xmis0(run_chain(m, p.point, chain_config(ChainKind::kMwg, 50000, 0.05, panel_init(m, p)), Rng(seed))), o));
      tv_ac.push_back(tv64(xmis0(run_chain(m, p.point, chain_config(ChainKind::kAcMwg, 50000, 0.01, panel_init(m, p)), Rng(seed))), o));
      LairConfig lc;
      lc.K = 19;
      lc.R = 1;
      lc.T = 2500;
      Rng rng(seed);
      tv_lair.push_back(tv64(xmis0(lair_run(m, p.point, lc, rng).samples), o));
    }
    const double mw = median(tv_mwg), ac = median(tv_ac), la = median(tv_lair);
    out.detail << "panel" << pi + 1 << " tv mwg " << mw << " ac-mwg " << ac << " lair " << la << "; ";
    const std::string s = " on panel " + std::to_string(pi + 1);
    out.require(ac < 0.1, "AC-MWG TV < 0.1" + s);
    out.require(la < 0.1, "LAIR TV < 0.1" + s);
    if (pi != 1) out.require(mw > 0.5, "MWG TV > 0.5" + s);
  }
  const double secs = seconds_since(t0);
  out.detail << secs << " s";
  out.require(secs < 300.0, "runtime < 5 min");
}

double lair_tv(const auto& model, const MaskedPoint& point, const auto& oracle, std::size_t K, std::size_t R,
               std::size_t T, std::uint64_t seed) {
  LairConfig lc;
  lc.K = K;
  lc.R = R;
  lc.T = T;
  if (K == 0) lc.n_out = T * R;
  Rng rng(seed);
  return tv64(xmis0(lair_run(model, point, lc, rng).samples), oracle);
}

void lair_trend(Outcome& out) {
  const MogLinearModel mog(testing::mog_config(EncoderPerturbation::widened(2.0)));
  const MaskedPoint point = testing::mog_point();
  const GaussianMixture oracle = mog.exact_conditional(point);
  std::vector<double> meds;
  for (std::size_t n : {5u, 10u, 20u, 40u}) {
    const std::size_t R = n / 5;  // eps = 0.2
    std::vector<double> tvs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) tvs.push_back(lair_tv(mog, point, oracle, n - R, R, 500, seed));
    meds.push_back(median(tvs));
    out.detail << "K+R=" << n << " tv " << meds.back() << "; ";
  }
  std::size_t inversions = 0;
  bool small = true;
  for (std::size_t i = 1; i < meds.size(); ++i) {
    if (meds[i] > meds[i - 1]) {
      ++inversions;
      small = small && meds[i] <= 1.1 * meds[i - 1];
    }
  }
  out.require(inversions <= 1 && small, "median TV non-increasing in K+R (one inversion <= 10%)");

  const GridVaeModel grid(testing::pitfall_grid_config());
  const auto panel = testing::pitfall_panels()[1];
  const GridOracle o(grid, panel.point, {});
  std::vector<double> sweep;
  for (std::size_t R : {0u, 1u, 4u, 10u, 20u}) {
    std::vector<double> tvs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) tvs.push_back(lair_tv(grid, panel.point, o, 20 - R, R, 2500, seed));
    sweep.push_back(mean(tvs));
    out.detail << "eps=" << static_cast<double>(R) / 20.0 << " tv " << sweep.back() << "; ";
  }
  const double best_mid = std::min({sweep[1], sweep[2], sweep[3]});
  out.require(sweep[0] >= *std::max_element(sweep.begin() + 1, sweep.end()), "eps = 0 worst on the multimodal panel");
  out.require(best_mid <= std::min(sweep[0], sweep[4]), "an intermediate eps is best");
  out.require(sweep[4] > best_mid, "eps = 1 worse than the best adaptive eps");
}

void importance_oracle(Outcome& out) {
  const MogLinearModel model(testing::mog_config());
  const MaskedPoint point = testing::mog_point();
  Rng rng(31);
  const std::size_t m = 1000;
  const IrResult exact = standard_ir(model, point, m, model.exact_posterior(point), rng);
  double worst = 0.0;
  for (double w : normalize_log_weights(exact.log_weights)) worst = std::max(worst, std::abs(w - 1.0 / static_cast<double>(m)));
  const IrResult prior = standard_ir_prior(model, point, 100000, rng);
  const double truth = model.log_marginal_observed(point);
  out.detail << "max |w - 1/M| " << worst << ", log p_hat " << prior.log_marginal << " vs " << truth << " (3se "
             << 3.0 * prior.log_marginal_se << ")";
  out.require(worst <= 1e-9, "exact-posterior weights equal 1/M");
  out.require(std::abs(prior.log_marginal - truth) <= 3.0 * prior.log_marginal_se, "evidence within 3 SE");
}

void doeblin(Outcome& out) {
  const GridVaeModel m(testing::pitfall_grid_config());
  std::vector<Vector> latents;
  for (std::size_t j = 0; j < 2048; ++j) latents.push_back(vec({static_cast<double>(j) / 2047.0}));
  double min_log_a = std::numeric_limits<double>::infinity();
  for (const auto& panel : testing::pitfall_panels()) {
    Rng rng(77);
    for (int h = 0; h < 10; ++h) {
      const Vector x_tilde = m.sample_decoder_conditional(panel.point, m.sample_prior(rng), rng);
      for (double eps : {0.01, 0.05, 0.3}) {
        const DoeblinBound b = doeblin_bound(m, panel.point, x_tilde, eps, latents);
        min_log_a = std::min(min_log_a, b.log_a);
        out.require(b.a() > 0.0, "a > 0 at eps " + std::to_string(eps));
      }
    }
  }
  out.detail << "min log a " << min_log_a;
}

SampleCloud gaussian_cloud(std::size_t n, double shift, Rng& rng) {
  Matrix m(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    m(i, 0) = rng.normal() + shift;
    m(i, 1) = rng.normal();
  }
  return SampleCloud(std::move(m));
}

void metric_suite(Outcome& out) {
  Rng rng(5);
  const SampleCloud x = gaussian_cloud(300, 0.0, rng);
  const SampleCloud y = gaussian_cloud(300, 0.8, rng);
  const double med = median_pairwise_sq_cost(x, x);
  const double e_self = energy_distance(x, x).statistic;
  const double k_self = laplacian_mmd(x, x);
  const double s_self = sinkhorn_distance(x, x, {1e-3 * med, 20000, 1e-9}).cost;
  out.require(std::abs(e_self) <= 1e-12 && k_self <= 1e-12 && s_self < 1e-3 * med, "self-distance ~ 0");

  const bool symmetric = std::abs(energy_distance(x, y).statistic - energy_distance(y, x).statistic) <= 1e-12 &&
                         std::abs(laplacian_mmd(x, y) - laplacian_mmd(y, x)) <= 1e-12 &&
                         std::abs(sinkhorn_distance(x, y).cost - sinkhorn_distance(y, x).cost) <= 1e-12;
  out.require(symmetric, "symmetry");

  using Metric = std::function<double(const SampleCloud&, const SampleCloud&)>;
  const std::vector<std::pair<std::string, Metric>> metrics{
      {"energy", [](const SampleCloud& a, const SampleCloud& b) { return energy_distance(a, b).statistic; }},
      {"mmd", [](const SampleCloud& a, const SampleCloud& b) { return laplacian_mmd(a, b, 1.0); }},
      {"sinkhorn", [](const SampleCloud& a, const SampleCloud& b) { return sinkhorn_distance(a, b).cost; }}};
  for (const auto& [name, f] : metrics) {
    std::vector<double> meds;
    for (double delta : {0.0, 0.5, 1.0}) {
      std::vector<double> v;
      for (std::uint64_t s = 1; s <= 5; ++s) {
        Rng r(s);
        const SampleCloud a = gaussian_cloud(400, 0.0, r);
        const SampleCloud b = gaussian_cloud(400, delta, r);
        v.push_back(f(a, b));
      }
      meds.push_back(median(v));
    }
    out.detail << name << " " << meds[0] << "<" << meds[1] << "<" << meds[2] << "; ";
    out.require(meds[0] < meds[1] && meds[1] < meds[2], name + " monotone under shift");
  }

  const Vector a = vec({0.3, -1.0}), b = vec({2.0, 0.5});
  const double one_point = sinkhorn_distance(SampleCloud::from_rows({a}), SampleCloud::from_rows({b}), {0.01, 100, 1e-12}).cost;
  const SampleCloud two = SampleCloud::from_scalars({0.0, 1.0});
  const double two_point = sinkhorn_distance(two, two, {1e-3, 10000, 1e-12}).cost;
  out.detail << "sinkhorn 1-pt err " << std::abs(one_point - (a - b).squaredNorm()) << ", 2-pt " << two_point;
  out.require(one_point == (a - b).squaredNorm(), "Sinkhorn 1-point exact");
  out.require(two_point < 1e-4, "Sinkhorn 2-point exact");
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CONDSAMP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism(Outcome& out) {
  const fs::path root = fs::temp_directory_path() / "condsamp_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::size_t compared = 0;
  for (const std::string name : {"smoke", "fig3_lair", "mog_imputation"}) {
    auto cfg = nlohmann::json::parse(slurp(fs::path(CONDSAMP_SOURCE_DIR) / "examples" / "configs" / (name + ".json")));
    if (cfg.contains("budget") && cfg["budget"].contains("evals")) cfg["budget"]["evals"] = 2000;
    cfg["metrics"] = {"tv"};
    for (auto& s : cfg["samplers"])
      if (s.contains("T")) s["T"] = std::min<int>(s["T"].get<int>(), 2000);
    for (const std::string run : {"a", "b"}) {
      cfg["output_dir"] = (root / (name + "_" + run)).string();
      const fs::path p = root / (name + "_" + run + ".json");
      std::ofstream(p) << cfg.dump();
      const int code = run_cli("run --workers " + std::string(run == "a" ? "1" : "4") + " --config " + p.string());
      out.require(code == 0, name + " run " + run + " exits 0");
    }
    const fs::path ta = root / (name + "_a") / "traces", tb = root / (name + "_b") / "traces";
    if (!fs::exists(ta) || !fs::exists(tb)) {
      out.require(false, name + " wrote traces");
      continue;
    }
    for (const auto& e : fs::directory_iterator(ta)) {
      out.require(slurp(e.path()) == slurp(tb / e.path().filename()), "identical " + e.path().filename().string());
      ++compared;
    }
  }
  out.detail << compared << " trace files compared";
  out.require(compared > 0, "some traces compared");
  fs::remove_all(root);
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"exact-gibbs-equivalence", exact_gibbs},
      {"acmwg-stationarity", acmwg_stationarity},
      {"pitfall-reproduction", pitfalls},
      {"remedy-reproduction", remedies},
      {"lair-consistency-trend", lair_trend},
      {"importance-sampling-oracle", importance_oracle},
      {"doeblin-check", doeblin},
      {"metric-suite-properties", metric_suite},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome out;
    try {
      fn(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << "[exception: " << e.what() << "]";
    }
    std::cout << (out.pass ? "PASS " : "FAIL ") << name << ": " << out.detail.str() << std::endl;
    failed += out.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criterion/criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
