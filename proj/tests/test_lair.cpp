#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/lair/importance.hpp"
#include "condsamp/lair/lair.hpp"
#include "condsamp/metrics/metrics.hpp"
#include "condsamp/testbeds/grid_oracle.hpp"
#include "condsamp/testbeds/grid_vae.hpp"
#include "condsamp/testbeds/mog_linear.hpp"
#include "test_models.hpp"

namespace condsamp {
namespace {

using testing::vec;

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

std::vector<double> first_coords(const std::vector<LairSample>& s) {
  std::vector<double> xs;
  for (const auto& x : s) xs.push_back(x.x_mis[0]);
  return xs;
}

class MogLair : public ::testing::Test {
 protected:
  MogLinearModel model{testing::mog_config()};
  MaskedPoint point = testing::mog_point();
};

// ---- weights ----

TEST_F(MogLair, PriorOnlyWeightIsObservedLikelihood) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Vector z = model.sample_prior(rng);
    EXPECT_DOUBLE_EQ(dm_mis_log_weight(model, point, z, {}, 3),
                     model.decoder_log_lik(point.values(), point, z, Scope::kObservedOnly));
  }
}

TEST_F(MogLair, ExactPosteriorComponentGivesConstantWeight) {
  const auto post = model.exact_posterior(point);
  const std::vector<GaussianMixture> enc{post};
  Rng rng(2);
  double lo = INFINITY, hi = -INFINITY;
  for (int i = 0; i < 100; ++i) {
    const double w = dm_mis_log_weight(model, point, post.sample(rng), enc, 0);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  EXPECT_LT(hi - lo, 1e-6);
  EXPECT_NEAR(lo, model.log_marginal_observed(point), 1e-6);
}

TEST_F(MogLair, DuplicateComponentsCollapse) {
  const auto q = model.encoder(point.merge(vec({0.4})));
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Vector z = q.sample(rng);
    EXPECT_NEAR(dm_mis_log_weight(model, point, z, {q, q}, 0), dm_mis_log_weight(model, point, z, {q}, 0), 1e-12);
  }
}

TEST_F(MogLair, WeightUsesFullMixtureDenominator) {
  const auto q1 = model.encoder(point.merge(vec({0.4})));
  const auto q2 = model.encoder(point.merge(vec({-1.0})));
  const Vector z = vec({0.2, 0.1});
  const double joint = model.log_prior(z) + model.decoder_log_lik(point.values(), point, z, Scope::kObservedOnly);
  const double mix = std::log((std::exp(q1.log_density(z)) + std::exp(q2.log_density(z)) + 2.0 * std::exp(model.log_prior(z))) / 4.0);
  EXPECT_NEAR(dm_mis_log_weight(model, point, z, {q1, q2}, 2), joint - mix, 1e-12);
}

// ---- resampling ----

TEST(Resample, SingleFiniteWeightAlwaysChosen) {
  const std::vector<double> lw{kNegInf, kNegInf, -3.0, kNegInf, kNegInf};
  Rng rng(1);
  for (auto scheme : {ResamplingScheme::kMultinomial, ResamplingScheme::kSystematic})
    for (std::size_t i : resample(lw, 1000, rng, scheme)) ASSERT_EQ(i, 2u);
  const std::vector<double> two{0.0, kNegInf};
  for (std::size_t i : multinomial_resample(two, 1000, rng)) ASSERT_EQ(i, 0u);
}

TEST(Resample, UniformWeightsGiveUniformFrequencies) {
  const std::vector<double> lw(4, -1.0);
  Rng rng(2);
  std::vector<double> freq(4, 0.0);
  const std::size_t n = 1000000;
  for (std::size_t i : multinomial_resample(lw, n, rng)) freq[i] += 1.0 / static_cast<double>(n);
  for (double f : freq) EXPECT_NEAR(f, 0.25, 0.002);
}

TEST(Resample, SystematicIsNearlyExact) {
  const std::vector<double> lw{std::log(0.5), std::log(0.25), std::log(0.25)};
  Rng rng(3);
  std::vector<std::size_t> c(3, 0);
  for (std::size_t i : systematic_resample(lw, 100, rng)) ++c[i];
  EXPECT_NEAR(static_cast<double>(c[0]), 50.0, 1.0);
  EXPECT_NEAR(static_cast<double>(c[1]), 25.0, 1.0);
}

TEST(Resample, AllZeroWeightsAreDegenerate) {
  const std::vector<double> lw(3, kNegInf);
  Rng rng(1);
  EXPECT_THROW((void)multinomial_resample(lw, 5, rng), DegenerateError);
  EXPECT_THROW((void)normalize_log_weights(lw), DegenerateError);
}

TEST(Ess, KnownValues) {
  EXPECT_NEAR(ess(std::vector<double>(8, -2.0)), 8.0, 1e-12);
  EXPECT_NEAR(ess(std::vector<double>{kNegInf, 1.0, kNegInf}), 1.0, 1e-12);
  EXPECT_NEAR(ess(std::vector<double>{std::log(2.0), 0.0, 0.0}), 16.0 / 6.0, 1e-12);
}

TEST(Ess, StaysWithinRange) {
  Rng rng(4);
  for (int r = 0; r < 100; ++r) {
    std::vector<double> lw(10);
    for (double& w : lw) w = rng.normal(0.0, 3.0);
    const double e = ess(lw);
    ASSERT_GE(e, 1.0 - 1e-12);
    ASSERT_LE(e, 10.0 + 1e-12);
  }
}

// ---- LAIR iterations ----

TEST_F(MogLair, PriorOnlyRunEqualsStandardImportanceResampling) {
  const std::size_t m = 200;
  LairConfig cfg;
  cfg.K = 0;
  cfg.R = m;
  cfg.T = 1;
  cfg.n_out = m;
  Rng a(5), b(5);
  const LairResult lair = lair_run(model, point, cfg, a);
  const IrResult ir = standard_ir_prior(model, point, m, b);
  ASSERT_EQ(lair.archive.size(), m);
  for (std::size_t i = 0; i < m; ++i) {
    ASSERT_EQ(lair.archive.entries()[i].z, ir.proposals[i]);
    ASSERT_EQ(lair.archive.entries()[i].log_weight, ir.log_weights[i]);
    ASSERT_EQ(lair.samples[i].z, ir.latents[i]);
    ASSERT_EQ(lair.samples[i].x_mis, ir.imputations[i]);
  }
}

TEST_F(MogLair, ArchiveBookkeeping) {
  LairConfig cfg;
  cfg.K = 6;
  cfg.R = 2;
  cfg.T = 25;
  Rng rng(6);
  const LairResult res = lair_run(model, point, cfg, rng);
  const auto& a = res.archive;
  ASSERT_EQ(a.size(), cfg.T * (cfg.K + cfg.R));
  ASSERT_EQ(a.iterations(), cfg.T);
  EXPECT_NEAR(sum(a.global_weights()), 1.0, 1e-9);
  for (std::size_t t = 0; t < cfg.T; ++t) {
    EXPECT_NEAR(sum(a.iteration_weights(t)), 1.0, 1e-9);
    std::vector<int> hits(cfg.K + cfg.R, 0);
    for (std::size_t j = 0; j < cfg.K + cfg.R; ++j) {
      const auto& e = a.entries()[t * (cfg.K + cfg.R) + j];
      ASSERT_EQ(e.t, t + 1);
      ASSERT_EQ(e.is_prior, e.k >= cfg.K);
      ++hits[e.k];
    }
    for (int h : hits) ASSERT_EQ(h, 1);
  }
  EXPECT_EQ(res.samples.size(), cfg.T * cfg.K);
  EXPECT_EQ(res.particles.K(), cfg.K);
  EXPECT_EQ(res.particles.t, cfg.T);
  EXPECT_DOUBLE_EQ(cfg.epsilon(), 0.25);
}

TEST_F(MogLair, IterationIsDeterministicAndSlotsShareEncoders) {
  Rng init(7);
  ParticleSet ps = lair_init(model, point, 1, 1, init);
  ps.x_mis.assign(4, ps.x_mis.front());
  ps.z.assign(4, ps.z.front());
  const ParticleSet before = ps;
  ParticleSet copy = ps;
  Rng a(8), b(8);
  const auto sa = lair_iteration(model, point, ps, a);
  const auto sb = lair_iteration(model, point, copy, b);
  ASSERT_EQ(sa.size(), 5u);
  for (std::size_t k = 0; k < sa.size(); ++k) {
    EXPECT_EQ(sa[k].z, sb[k].z);
    EXPECT_EQ(sa[k].log_weight, sb[k].log_weight);
  }
  const auto q0 = model.encoder(point.merge(before.x_mis[0]));
  for (std::size_t k = 1; k < 4; ++k)
    EXPECT_EQ(model.encoder(point.merge(before.x_mis[k])).log_density(sa[k].z), q0.log_density(sa[k].z));
}

TEST_F(MogLair, SingleIterationFinalizeMatchesIterationResampling) {
  Rng init(9);
  ParticleSet ps = lair_init(model, point, 5, 1, init);
  Rng it(10);
  ParticleArchive archive;
  const auto slice = lair_iteration(model, point, ps, it);
  std::vector<double> lw;
  for (const auto& e : slice) lw.push_back(e.log_weight);
  archive.append(slice);
  Rng a(11), b(11);
  const auto out = lair_finalize(archive, 50, model, point, a);
  const auto idx = multinomial_resample(lw, 50, b);
  ASSERT_EQ(out.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(out[i].source_k, slice[idx[i]].k);
}

TEST(Lair, AllZeroWeightsAreDegenerate) {
  const MogLinearModel inner(testing::mog_config());
  const testing::ShiftedModel<MogLinearModel> dead{&inner, kNegInf};
  const MaskedPoint p = testing::mog_point();
  Rng rng(1);
  ParticleSet ps = lair_init(dead, p, 3, 1, rng);
  EXPECT_THROW((void)lair_iteration(dead, p, ps, rng), DegenerateError);
  EXPECT_THROW((void)standard_ir_prior(dead, p, 10, rng), DegenerateError);
}

TEST(Lair, InvalidConfigsAreRejected) {
  const MogLinearModel m(testing::mog_config());
  const MaskedPoint p = testing::mog_point();
  Rng rng(1);
  LairConfig cfg;
  cfg.K = 0;
  cfg.R = 0;
  EXPECT_THROW((void)lair_run(m, p, cfg, rng), ConfigError);
  cfg.R = 3;
  EXPECT_THROW((void)lair_run(m, p, cfg, rng), ConfigError);  // K = 0 needs n_out
  cfg.K = 2;
  cfg.T = 0;
  EXPECT_THROW((void)lair_run(m, p, cfg, rng), ConfigError);
  testing::ToyModel toy;
  toy.obs_marginal = false;
  EXPECT_THROW((void)lair_init(toy, MaskedPoint(vec({0.0, 0.0}), {true, false}), 2, 1, rng), CapabilityError);
  EXPECT_THROW((void)lair_finalize(ParticleArchive{}, 5, m, p, rng), UsageError);
}

TEST(Lair, CoversEveryPitfallPanel) {
  const GridVaeModel m(testing::pitfall_grid_config());
  for (const auto& panel : testing::pitfall_panels()) {
    const GridOracle o(m, panel.point, {});
    LairConfig cfg;
    cfg.K = 19;
    cfg.R = 1;
    cfg.T = 2500;
    Rng rng(12);
    const LairResult res = lair_run(m, panel.point, cfg, rng);
    EXPECT_LT(tv_grid(SampleCloud::from_scalars(first_coords(res.samples)), o, 64), 0.1);
  }
}

TEST(Lair, PositiveEpsilonCopesWithMultimodalPanel) {
  const GridVaeModel m(testing::pitfall_grid_config());
  const auto panel = testing::pitfall_panels()[1];
  const GridOracle o(m, panel.point, {});
  for (std::size_t R : {1u, 4u, 10u}) {  // eps = 0.05, 0.2, 0.5 at K + R = 20
    LairConfig cfg;
    cfg.K = 20 - R;
    cfg.R = R;
    cfg.T = 2500;
    Rng rng(13);
    const LairResult res = lair_run(m, panel.point, cfg, rng);
    EXPECT_LT(tv_grid(SampleCloud::from_scalars(first_coords(res.samples)), o, 64), 0.15) << "R=" << R;
  }
}

TEST(Lair, EncoderOnlyPopulationFailsMultimodalPanel) {
  const GridVaeModel m(testing::pitfall_grid_config());
  const auto panel = testing::pitfall_panels()[1];
  const GridOracle o(m, panel.point, {});
  double mean_tv = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    LairConfig cfg;
    cfg.K = 20;
    cfg.R = 0;
    cfg.T = 2500;
    Rng rng(seed);
    const LairResult res = lair_run(m, panel.point, cfg, rng);
    mean_tv += tv_grid(SampleCloud::from_scalars(first_coords(res.samples)), o, 64) / 5.0;
  }
  EXPECT_GT(mean_tv, 0.3);
}

TEST(Lair, FinalResamplingBeatsLastIterationParticles) {
  const GridVaeModel m(testing::pitfall_grid_config());
  const auto panel = testing::pitfall_panels()[0];
  const GridOracle o(m, panel.point, {});
  std::vector<double> tv_final, tv_last;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    LairConfig cfg;
    cfg.K = 19;
    cfg.R = 1;
    cfg.T = 500;
    Rng rng(seed);
    const LairResult res = lair_run(m, panel.point, cfg, rng);
    std::vector<double> last;
    for (const auto& x : res.particles.x_mis) last.push_back(x[0]);
    tv_final.push_back(tv_grid(SampleCloud::from_scalars(first_coords(res.samples)), o, 64));
    tv_last.push_back(tv_grid(SampleCloud::from_scalars(last), o, 64));
  }
  std::sort(tv_final.begin(), tv_final.end());
  std::sort(tv_last.begin(), tv_last.end());
  EXPECT_LE(tv_final[2], tv_last[2]);
}

// ---- standard importance resampling ----

TEST_F(MogLair, PriorProposalEvidenceEstimate) {
  Rng rng(14);
  const IrResult r = standard_ir_prior(model, point, 100000, rng);
  EXPECT_NEAR(r.log_marginal, model.log_marginal_observed(point), 3.0 * r.log_marginal_se);
  EXPECT_GT(r.log_marginal_se, 0.0);
}

TEST_F(MogLair, ExactPosteriorProposalGivesEqualWeights) {
  Rng rng(15);
  const std::size_t m = 1000;
  const IrResult r = standard_ir(model, point, m, model.exact_posterior(point), rng);
  for (double w : normalize_log_weights(r.log_weights)) ASSERT_NEAR(w, 1.0 / static_cast<double>(m), 1e-9);
}

TEST_F(MogLair, SingleProposalHasUnitWeight) {
  Rng rng(16);
  const IrResult r = standard_ir_prior(model, point, 1, rng);
  ASSERT_EQ(r.latents.size(), 1u);
  EXPECT_EQ(normalize_log_weights(r.log_weights).front(), 1.0);
  EXPECT_EQ(r.imputations.front().size(), 1);
  EXPECT_THROW((void)standard_ir_prior(model, point, 0, rng), ConfigError);
}

TEST_F(MogLair, EncoderProposalIsSupported) {
  Rng rng(17);
  const IrResult r = standard_ir_encoder(model, point, 500, point.merge(vec({0.0})), rng);
  EXPECT_EQ(r.imputations.size(), 500u);
  EXPECT_TRUE(std::isfinite(r.log_marginal));
}

}  // namespace
}  // namespace condsamp
