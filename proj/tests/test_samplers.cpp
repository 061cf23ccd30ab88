#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "condsamp/core/error.hpp"
#include "condsamp/metrics/metrics.hpp"
#include "condsamp/samplers/acmwg.hpp"
#include "condsamp/samplers/doeblin.hpp"
#include "condsamp/samplers/init.hpp"
#include "condsamp/samplers/mwg.hpp"
#include "condsamp/samplers/pseudo_gibbs.hpp"
#include "condsamp/samplers/run_chain.hpp"
#include "condsamp/testbeds/grid_oracle.hpp"
#include "condsamp/testbeds/grid_vae.hpp"
#include "condsamp/testbeds/mog_linear.hpp"
#include "test_models.hpp"

namespace condsamp {
namespace {

using testing::vec;

std::vector<double> xmis_series(const ChainTrace& tr, std::size_t coord = 0) {
  std::vector<double> xs;
  for (const auto* r : tr.post_burn_in()) xs.push_back(r->x_mis[static_cast<Eigen::Index>(coord)]);
  return xs;
}

double variance_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return v / static_cast<double>(xs.size());
}

ChainConfig chain(ChainKind kind, std::size_t T, InitStrategy init = InitStrategy::marginal()) {
  ChainConfig c;
  c.kind = kind;
  c.T = T;
  c.init = std::move(init);
  return c;
}

// Fraction of post-burn-in latents outside the given mode interval.
double escape_fraction(const GridVaeModel& m, const ChainTrace& tr, std::size_t mode) {
  const auto post = tr.post_burn_in();
  std::size_t out = 0;
  for (const auto* r : post) out += m.mode_of(r->z[0]) != mode;
  return static_cast<double>(out) / static_cast<double>(post.size());
}

class MogChains : public ::testing::Test {
 protected:
  MogLinearModel exact{testing::mog_config()};
  MaskedPoint point = testing::mog_point();
  GaussianMixture oracle = exact.exact_conditional(point);
  double oracle_mean = oracle.mean()[0];
  double oracle_var = oracle.covariance()(0, 0);
};

// ---- pseudo-Gibbs ----

TEST_F(MogChains, PseudoGibbsWithExactEncoderMatchesConditionalMean) {
  const ChainTrace tr = run_chain(exact, point, chain(ChainKind::kPseudoGibbs, 50000), Rng(1));
  const auto s = testing::batch_means(xmis_series(tr));
  EXPECT_NEAR(s.mean, oracle_mean, 3.0 * s.se);
  EXPECT_EQ(tr.acceptance_rate(), 1.0);
}

TEST(PseudoGibbs, ClipClampsImputations) {
  testing::ToyModel m;
  m.enc_mean = 5.0;
  m.enc_sd = 1e-9;
  m.noise = 1e-9;
  const MaskedPoint p(vec({0.0, 0.0}), {true, false});
  ChainState s;
  s.z = vec({0.0});
  s.x_mis = vec({0.0});
  Rng rng(1);
  pseudo_gibbs_step(m, p, s, rng, ClipBounds{-1.0, 1.0});
  EXPECT_EQ(s.x_mis[0], 1.0);
  EXPECT_NEAR(s.z[0], 5.0, 1e-6);
}

TEST_F(MogChains, PseudoGibbsStepIsDeterministic) {
  ChainState a;
  a.z = vec({0.1, 0.2});
  a.x_mis = vec({0.5});
  ChainState b = a;
  Rng ra(9), rb(9);
  pseudo_gibbs_step(exact, point, a, ra);
  pseudo_gibbs_step(exact, point, b, rb);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.x_mis, b.x_mis);
}

TEST(PseudoGibbs, NonFiniteImputationMarksDivergence) {
  testing::ToyModel m;
  m.noise = std::numeric_limits<double>::infinity();
  const MaskedPoint p(vec({0.0, 0.0}), {true, false});
  ChainState s;
  s.z = vec({0.0});
  s.x_mis = vec({0.0});
  Rng rng(2);
  pseudo_gibbs_step(m, p, s, rng);
  EXPECT_TRUE(s.diverged);
  EXPECT_TRUE(s.x_mis.allFinite());
}

TEST(PseudoGibbs, DivergedChainStopsEarly) {
  testing::ToyModel m;
  m.enc_sd = std::numeric_limits<double>::infinity();
  const MaskedPoint p(vec({0.0, 0.0}), {true, false});
  const ChainTrace tr = run_chain(m, p, chain(ChainKind::kPseudoGibbs, 100), Rng(1));
  EXPECT_TRUE(tr.diverged);
  EXPECT_EQ(tr.diverged_at, 1u);
  EXPECT_LT(tr.steps, 100u);
}

// ---- MWG ----

TEST_F(MogChains, MwgAcceptsIdenticalProposal) {
  ChainState s;
  s.z = vec({0.4, -0.2});
  s.x_mis = vec({0.1});
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Vector z = s.z;
    const StepInfo info = mwg_step_with_proposal(exact, point, s, z, rng);
    ASSERT_TRUE(info.accepted);
    ASSERT_EQ(info.log_accept_ratio, 0.0);
  }
}

TEST_F(MogChains, MwgWithExactEncoderAcceptsEveryStep) {
  Rng init_rng(4), rng(5);
  ChainState s = initial_state(exact, point, InitStrategy::marginal(), init_rng);
  const double floor = std::log1p(-1e-8);
  for (int i = 0; i < 50000; ++i) {
    const StepInfo info = mwg_step(exact, point, s, rng);
    ASSERT_GE(info.log_accept_ratio, floor) << "step " << i;
    ASSERT_TRUE(info.accepted);
  }
  EXPECT_EQ(s.accept_count, 50000u);
}

TEST_F(MogChains, NarrowEncoderLowersMwgAcceptance) {
  const MogLinearModel narrow = perturb_encoder(exact, EncoderPerturbation::narrowed(0.5));
  const ChainTrace a = run_chain(exact, point, chain(ChainKind::kMwg, 10000), Rng(6));
  const ChainTrace b = run_chain(narrow, point, chain(ChainKind::kMwg, 10000), Rng(6));
  EXPECT_LT(b.acceptance_rate(), a.acceptance_rate());
  EXPECT_LT(b.acceptance_rate(), 0.9);
}

TEST(Mwg, BothTermsZeroIsRejectedAndFlagged) {
  const GridVaeModel m(testing::pitfall_grid_config());
  const MaskedPoint p(vec({0.0, 0.0}), {false, true});
  ChainState s;
  s.z = vec({1.5});
  s.x_mis = vec({0.0});
  Rng rng(1);
  const StepInfo info = mwg_step_with_proposal(m, p, s, vec({2.0}), rng);
  EXPECT_FALSE(info.accepted);
  EXPECT_TRUE(info.degenerate);
  EXPECT_EQ(s.degenerate_count, 1u);
  EXPECT_EQ(s.z[0], 1.5);
}

TEST(Mwg, StaysInInitialModeWhilePseudoGibbsMoves) {
  const GridVaeModel m(testing::pitfall_grid_config());
  const auto panel = testing::pitfall_panels()[0];
  const auto init = InitStrategy::fixed(vec({testing::plateau_centre(m, panel.init_mode)}));
  const ChainTrace mwg = run_chain(m, panel.point, chain(ChainKind::kMwg, 50000, init), Rng(7));
  const ChainTrace pg = run_chain(m, panel.point, chain(ChainKind::kPseudoGibbs, 50000, init), Rng(7));
  EXPECT_LT(escape_fraction(m, mwg, panel.init_mode), 0.001);
  EXPECT_GT(escape_fraction(m, pg, panel.init_mode), 0.1);
}

TEST(Mwg, RejectsProposalsIntoOtherModes) {
  const GridVaeModel m(testing::pitfall_grid_config());
  const auto panel = testing::pitfall_panels()[0];
  Rng init_rng(7), rng(8);
  ChainState s = initial_state(m, panel.point,
                               InitStrategy::fixed(vec({testing::plateau_centre(m, panel.init_mode)})), init_rng);
  std::size_t cross = 0, cross_accepted = 0;
  for (int i = 0; i < 50000; ++i) {
    const Vector z_prop = m.encoder(panel.point.merge(s.x_mis)).sample(rng);
    const bool crosses = m.mode_of(z_prop[0]) != m.mode_of(s.z[0]);
    const StepInfo info = mwg_step_with_proposal(m, panel.point, s, z_prop, rng);
    cross += crosses;
    cross_accepted += crosses && info.accepted;
  }
  ASSERT_GT(cross, 0u);
  EXPECT_LT(static_cast<double>(cross_accepted) / static_cast<double>(cross), 0.05);
}

TEST_F(MogChains, DecisionsInvariantToLikelihoodOffset) {
  const MogLinearModel wide = perturb_encoder(exact, EncoderPerturbation::widened(2.0));
  const testing::ShiftedModel<MogLinearModel> shifted{&wide, 3.75};
  for (ChainKind kind : {ChainKind::kMwg, ChainKind::kAcMwg}) {
    const ChainTrace a = run_chain(wide, point, chain(kind, 3000), Rng(8));
    const ChainTrace b = run_chain(shifted, point, chain(kind, 3000), Rng(8));
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) ASSERT_EQ(a.records[i].accepted, b.records[i].accepted) << i;
    EXPECT_GT(a.acceptance_rate(), 0.0);
    EXPECT_LT(a.acceptance_rate(), 1.0);
  }
}

// ---- AC-MWG ----

TEST_F(MogChains, AcMwgAcceptsIdenticalProposal) {
  Rng rng(2);
  ChainState s = initial_state(exact, point, InitStrategy::marginal(), rng);
  AcMwgHistory h = initial_history(exact, point, rng);
  for (int i = 0; i < 50; ++i) {
    const Vector z = s.z;
    const StepInfo info = acmwg_step_with_proposal(exact, point, s, h, 0.05, z, rng);
    ASSERT_TRUE(info.accepted);
    ASSERT_EQ(info.log_accept_ratio, 0.0);
  }
}

TEST_F(MogChains, AcMwgMatchesConditionalMoments) {
  ChainConfig c = chain(ChainKind::kAcMwg, 50000);
  c.epsilon = 0.05;
  const ChainTrace tr = run_chain(exact, point, c, Rng(10));
  const auto xs = xmis_series(tr);
  const auto s = testing::batch_means(xs);
  EXPECT_NEAR(s.mean, oracle_mean, 3.0 * s.se);
  std::vector<double> sq;
  for (double x : xs) sq.push_back((x - oracle_mean) * (x - oracle_mean));
  const auto v = testing::batch_means(sq);
  EXPECT_NEAR(v.mean, oracle_var, 3.0 * v.se);
}

TEST(AcMwg, ReachesEveryModeOfThePitfallPanels) {
  const GridVaeModel m(testing::pitfall_grid_config());
  for (const auto& panel : testing::pitfall_panels()) {
    const GridOracle o(m, panel.point, {});
    const auto init = InitStrategy::fixed(vec({testing::plateau_centre(m, panel.init_mode)}));
    ChainConfig c = chain(ChainKind::kAcMwg, 50000, init);
    c.epsilon = 0.01;
    const ChainTrace ac = run_chain(m, panel.point, c, Rng(11));
    EXPECT_LT(tv_grid(SampleCloud::from_scalars(xmis_series(ac)), o, 64), 0.1);
  }
}

TEST_F(MogChains, ProposalImputationNeverComesFromCurrentLatent) {
  const MogLinearModel wide = perturb_encoder(exact, EncoderPerturbation::widened(2.0));
  Rng rng(12);
  ChainState s = initial_state(wide, point, InitStrategy::marginal(), rng);
  AcMwgHistory h = initial_history(wide, point, rng);
  ASSERT_EQ(h.accepted().front().epoch, kIndependentEpoch);
  h.add_pending(s.x_mis, s.epoch);
  std::size_t accepted = 0;
  for (int i = 0; i < 5000; ++i) {
    const std::uint64_t epoch = s.epoch;
    const std::size_t n_acc = h.accepted().size(), n_pend = h.pending().size();
    const StepInfo info = acmwg_step(wide, point, s, h, 0.05, rng);
    ASSERT_NE(info.history_epoch, epoch) << "step " << i;
    if (info.accepted) {
      ++accepted;
      ASSERT_EQ(h.accepted().size(), n_acc + n_pend);
      ASSERT_EQ(h.pending().size(), 1u);
    } else {
      ASSERT_EQ(h.accepted().size(), n_acc);
      ASSERT_EQ(h.pending().size(), n_pend + 1);
    }
    for (const auto& e : h.pending()) ASSERT_EQ(e.epoch, s.epoch);
  }
  EXPECT_GT(accepted, 0u);
}

TEST_F(MogChains, PriorComponentShareMatchesEpsilon) {
  ChainConfig c = chain(ChainKind::kAcMwg, 10000);
  c.epsilon = 0.5;
  const ChainTrace tr = run_chain(exact, point, c, Rng(13));
  EXPECT_NEAR(static_cast<double>(tr.prior_proposals) / 10000.0, 0.5, 0.02);
}

TEST_F(MogChains, EpsilonOutsideOpenIntervalIsConfigError) {
  Rng rng(1);
  ChainState s = initial_state(exact, point, InitStrategy::marginal(), rng);
  AcMwgHistory h = initial_history(exact, point, rng);
  for (double eps : {0.0, 1.0, -0.2, 1.5}) EXPECT_THROW(acmwg_step(exact, point, s, h, eps, rng), ConfigError) << eps;
  ChainConfig c = chain(ChainKind::kAcMwg, 10);
  c.epsilon = 0.0;
  try {
    (void)run_chain(exact, point, c, Rng(1));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("(0, 1)"), std::string::npos);
  }
}

TEST(AcMwg, NeedsObservedOnlyLikelihood) {
  testing::ToyModel m;
  m.obs_marginal = false;
  const MaskedPoint p(vec({0.0, 0.0}), {true, false});
  Rng rng(1);
  ChainState s = initial_state(m, p, InitStrategy::marginal(), rng);
  AcMwgHistory h = initial_history(m, p, rng);
  EXPECT_THROW(acmwg_step(m, p, s, h, 0.1, rng), CapabilityError);
}

TEST(AcMwgHistory, WindowRestrictsDrawsToRecentEntries) {
  AcMwgHistory h(3);
  for (int i = 0; i < 10; ++i) h.seed(vec({static_cast<double>(i)}), static_cast<std::uint64_t>(i));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) ASSERT_GE(h.draw(rng).x_mis[0], 7.0);
  AcMwgHistory full;
  EXPECT_THROW((void)full.draw(rng), UsageError);
}

TEST(AcMwgHistory, PendingEntriesAreNeverDrawn) {
  AcMwgHistory h;
  h.seed(vec({1.0}), 0);
  h.add_pending(vec({2.0}), 1);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) ASSERT_EQ(h.draw(rng).x_mis[0], 1.0);
  h.flush();
  EXPECT_EQ(h.accepted().size(), 2u);
  EXPECT_TRUE(h.pending().empty());
}

// ---- run_chain ----

TEST_F(MogChains, SingleStepChainHasOneRecord) {
  const ChainTrace tr = run_chain(exact, point, chain(ChainKind::kMwg, 1), Rng(1));
  EXPECT_EQ(tr.records.size(), 1u);
  EXPECT_EQ(tr.records.front().t, 1u);
}

TEST_F(MogChains, SameSeedGivesIdenticalTraces) {
  for (ChainKind kind : {ChainKind::kPseudoGibbs, ChainKind::kMwg, ChainKind::kAcMwg}) {
    const ChainTrace a = run_chain(exact, point, chain(kind, 500), Rng(77));
    const ChainTrace b = run_chain(exact, point, chain(kind, 500), Rng(77));
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
      ASSERT_EQ(a.records[i].z, b.records[i].z);
      ASSERT_EQ(a.records[i].x_mis, b.records[i].x_mis);
      ASSERT_EQ(a.records[i].accepted, b.records[i].accepted);
    }
  }
}

TEST_F(MogChains, IndependentChainsAgree) {
  const MogLinearModel wide = perturb_encoder(exact, EncoderPerturbation::widened(2.0));
  std::vector<double> means;
  for (std::uint64_t c = 0; c < 5; ++c) {
    const auto xs = xmis_series(run_chain(wide, point, chain(ChainKind::kMwg, 10000), Rng(100).split(c)));
    double m = 0.0;
    for (double x : xs) m += x;
    means.push_back(m / static_cast<double>(xs.size()));
  }
  double grand = 0.0;
  for (double m : means) grand += m / 5.0;
  double sd = 0.0;
  for (double m : means) sd += (m - grand) * (m - grand);
  sd = std::sqrt(sd / 4.0);
  for (double m : means) EXPECT_LE(std::abs(m - grand), 4.0 * sd);
  EXPECT_LE(std::abs(grand - oracle_mean), 4.0 * sd / std::sqrt(5.0) + 1e-3);
}

TEST_F(MogChains, ThinningAndBurnIn) {
  ChainConfig c = chain(ChainKind::kMwg, 100);
  c.thin = 3;
  const ChainTrace tr = run_chain(exact, point, c, Rng(1));
  EXPECT_EQ(tr.records.size(), 33u);
  EXPECT_EQ(tr.burn_in, 10u);
  for (std::size_t i = 0; i < tr.records.size(); ++i) {
    EXPECT_EQ(tr.records[i].t % 3, 0u);
    if (i > 0) EXPECT_GT(tr.records[i].t, tr.records[i - 1].t);
  }
  for (const auto* r : tr.post_burn_in()) EXPECT_GT(r->t, 10u);
  c.burn_in = 0;
  EXPECT_EQ(run_chain(exact, point, c, Rng(1)).post_burn_in().size(), 33u);
}

TEST_F(MogChains, InvalidChainConfigsAreRejected) {
  ChainConfig c = chain(ChainKind::kMwg, 0);
  EXPECT_THROW((void)run_chain(exact, point, c, Rng(1)), ConfigError);
  c.T = 10;
  c.thin = 0;
  EXPECT_THROW((void)run_chain(exact, point, c, Rng(1)), ConfigError);
  c.thin = 1;
  c.clip = ClipBounds{-1.0, 1.0};
  EXPECT_THROW((void)run_chain(exact, point, c, Rng(1)), ConfigError);
  const MaskedPoint full(vec({0.0, 0.0, 0.0}), {true, true, true});
  EXPECT_THROW((void)run_chain(exact, full, chain(ChainKind::kMwg, 10), Rng(1)), UsageError);
}

// ---- initialisation ----

TEST(Init, MarginalImputationLiesInDecoderSupport) {
  const GridVaeModel m(testing::pitfall_grid_config());
  for (const auto& panel : testing::pitfall_panels()) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
      const ChainState s = initial_state(m, panel.point, InitStrategy::marginal(), rng);
      ASSERT_GE(s.z[0], 0.0);
      ASSERT_LE(s.z[0], 1.0);
      ASSERT_GT(s.x_mis[0], -0.2);
      ASSERT_LT(s.x_mis[0], 1.2);
      ASSERT_EQ(s.t, 0u);
    }
  }
}

TEST(Init, PseudoGibbsWarmupImprovesMwgCoverage) {
  const GridVaeModel m(testing::pitfall_grid_config());
  const auto panel = testing::pitfall_panels()[2];
  const GridOracle o(m, panel.point, {});
  const auto fixed = InitStrategy::fixed(vec({testing::plateau_centre(m, panel.init_mode)}));
  double tv_cold = 0.0, tv_warm = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto cold = run_chain(m, panel.point, chain(ChainKind::kMwg, 10000, fixed), Rng(seed));
    const auto warm =
        run_chain(m, panel.point, chain(ChainKind::kMwg, 10000, InitStrategy::pseudo_gibbs_warmup(120)), Rng(seed));
    tv_cold += tv_grid(SampleCloud::from_scalars(xmis_series(cold)), o, 64) / 5.0;
    tv_warm += tv_grid(SampleCloud::from_scalars(xmis_series(warm)), o, 64) / 5.0;
  }
  EXPECT_LT(tv_warm, tv_cold);
}

TEST(Init, LairWarmupGivesValidState) {
  const GridVaeModel m(testing::pitfall_grid_config());
  for (const auto& panel : testing::pitfall_panels()) {
    Rng rng(4);
    const ChainState s = initial_state(m, panel.point, InitStrategy::lair_warmup(120, 4, 1), rng);
    ASSERT_EQ(s.z.size(), 1);
    ASSERT_EQ(s.x_mis.size(), 1);
    EXPECT_TRUE(s.x_mis.allFinite());
    EXPECT_EQ(m.log_prior(s.z), 0.0);
    EXPECT_EQ(s.accept_count, 0u);
  }
}

TEST_F(MogChains, InvalidInitIsConfigError) {
  Rng rng(1);
  EXPECT_THROW((void)initial_state(exact, point, InitStrategy::fixed(vec({0.0})), rng), ConfigError);
  EXPECT_THROW((void)initial_state(exact, point, InitStrategy::pseudo_gibbs_warmup(0), rng), ConfigError);
  EXPECT_THROW((void)initial_state(exact, point, InitStrategy::lair_warmup(0, 4, 1), rng), ConfigError);
}

// ---- Doeblin bound ----

TEST(Doeblin, MixtureProposalDominatesPosterior) {
  const GridVaeModel m(testing::pitfall_grid_config());
  std::vector<Vector> latents;
  for (std::size_t j = 0; j < 2048; ++j) latents.push_back(vec({static_cast<double>(j) / 2047.0}));
  for (const auto& panel : testing::pitfall_panels()) {
    Rng rng(5);
    for (int h = 0; h < 10; ++h) {
      const Vector x_tilde = m.sample_decoder_conditional(panel.point, m.sample_prior(rng), rng);
      for (double eps : {0.01, 0.05, 0.3}) {
        const DoeblinBound b = doeblin_bound(m, panel.point, x_tilde, eps, latents);
        ASSERT_GT(b.a(), 0.0) << "eps=" << eps;
        // the prior share alone bounds the ratio by eps * p(x_obs) / max_z p(x_obs | z)
        const double log_peak = -std::log(std::sqrt(2.0 * M_PI) * m.decoder_std()[0]);
        ASSERT_GE(b.log_a, std::log(eps) + m.log_marginal_observed(panel.point) - log_peak - 1e-9);
      }
      const DoeblinBound none = doeblin_bound(m, panel.point, x_tilde, 0.0, latents);
      ::testing::Test::RecordProperty("log_a_eps0", std::to_string(none.log_a));
    }
  }
}

}  // namespace
}  // namespace condsamp
