#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hybridpair/ce_engine.hpp"
#include "oracles.hpp"

using namespace hybridpair;

TEST(EliteSelect, HandSortedMinimum) {
  const std::vector<double> scores{5, 1, 3, 2};
  const auto sel = elite_select(scores, 0.5, Orientation::minimize);
  EXPECT_EQ(sel.gamma, 2.0);
  EXPECT_EQ(sel.indices, (std::vector<std::size_t>{1, 3}));
}

TEST(EliteSelect, TiesGoToTheLowerIndex) {
  const std::vector<double> scores{4, 4, 4, 4};
  const auto sel = elite_select(scores, 0.25, Orientation::minimize);
  EXPECT_EQ(sel.indices, (std::vector<std::size_t>{0}));
}

TEST(EliteSelect, FullFractionTakesEverything) {
  const std::vector<double> scores{0.3, -1, 7, 2, 2};
  EXPECT_EQ(elite_select(scores, 1.0, Orientation::minimize).indices.size(), 5u);
  const auto sel = elite_select(scores, 0.4, Orientation::maximize);
  EXPECT_EQ(sel.indices, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(sel.gamma, 2.0);
}

TEST(EliteSelect, SizeIsCeilOfRhoN) {
  std::vector<double> scores(37);
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = static_cast<double>((i * 7) % 37);
  for (const double rho : {0.01, 0.1, 0.25, 0.3, 0.5, 0.99}) {
    const auto want = static_cast<std::size_t>(std::ceil(rho * 37 - 1e-9));
    EXPECT_EQ(elite_select(scores, rho, Orientation::minimize).indices.size(), want) << rho;
  }
}

TEST(CEConfig, Validation) {
  CEConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.rho = 1.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.batch_size = 10;
  cfg.rho = 0.1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.alpha = 1.01;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(CeOptimize, QuadraticToyReachesTheOptimum) {
  CEConfig cfg;
  cfg.batch_size = 200;
  cfg.rho = 0.1;
  cfg.alpha = 0.8;
  cfg.max_iterations = 50;
  cfg.seed = 11;
  const auto objective = [](const std::vector<double>& x) {
    double s = 0.0;
    for (const double v : x) s -= (v - 3.0) * (v - 3.0);
    return s;
  };
  const auto r = ce_optimize<GaussianFamily>(objective, GaussianFamily({0.0, -5.0}, {25.0, 25.0}), cfg);
  for (const double m : r.family.means()) EXPECT_NEAR(m, 3.0, 0.05);
  EXPECT_LE(r.history.size(), 50u);
  EXPECT_GT(r.best_score, -0.01);
}

TEST(CeOptimize, ConvergedStartStallsAfterDepthPlusOne) {
  CEConfig cfg;
  cfg.batch_size = 20;
  cfg.stall_depth = 3;
  const auto objective = [](const std::vector<std::size_t>& x) { return x[0] == 2 ? 1.0 : 0.0; };
  const auto r = ce_optimize<CategoricalFamily>(
      objective, CategoricalFamily({CategoricalStep::one_hot(4, 2)}), cfg);
  EXPECT_TRUE(r.stalled);
  EXPECT_EQ(r.history.size(), cfg.stall_depth + 1);
  for (const auto& h : r.history) EXPECT_EQ(h.gamma, 1.0);
}

TEST(CeOptimize, SameSeedSameHistory) {
  CEConfig cfg;
  cfg.seed = 7;
  cfg.max_iterations = 10;
  const auto objective = [](const std::vector<double>& x) { return -std::abs(x[0] - 1.0); };
  const auto a = ce_optimize<GaussianFamily>(objective, GaussianFamily({0.0}, {4.0}), cfg);
  const auto b = ce_optimize<GaussianFamily>(objective, GaussianFamily({0.0}, {4.0}), cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].gamma, b.history[i].gamma);
    EXPECT_EQ(a.history[i].params_digest, b.history[i].params_digest);
  }
}

TEST(CeOptimize, WholeBatchEliteGivesWholeBatchMoments) {
  CEConfig cfg;
  cfg.batch_size = 50;
  cfg.rho = 1.0;
  cfg.alpha = 1.0;
  cfg.max_iterations = 1;
  cfg.seed = 3;
  const GaussianFamily start({1.0}, {2.0});
  const auto r = ce_optimize<GaussianFamily>([](const std::vector<double>& x) { return x[0]; },
                                             start, cfg);
  std::vector<double> xs;
  for (std::size_t k = 0; k < cfg.batch_size; ++k) {
    xs.push_back(start.sample(derive_seed(cfg.seed, "ce-sample", k))[0]);
  }
  const auto m = oracle::weighted_moments(xs, std::vector<double>(xs.size(), 1.0));
  EXPECT_NEAR(r.family.means()[0], m.mean, 1e-12);
  EXPECT_NEAR(r.family.variances()[0], m.var, 1e-12);
}

TEST(CeOptimize, NonFiniteScoresAreDropped) {
  CEConfig cfg;
  cfg.max_iterations = 3;
  const auto some_nan = [](const std::vector<double>& x) {
    return x[0] < 0.0 ? std::numeric_limits<double>::quiet_NaN() : -x[0];
  };
  EXPECT_NO_THROW(ce_optimize<GaussianFamily>(some_nan, GaussianFamily({0.5}, {1.0}), cfg));
  const auto all_nan = [](const std::vector<double>&) { return std::numeric_limits<double>::infinity(); };
  try {
    ce_optimize<GaussianFamily>(all_nan, GaussianFamily({0.0}, {1.0}), cfg);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "degenerate objective");
  }
}

TEST(CeOptimize, AlphaOneRepeatsAFixedPoint) {
  const CategoricalFamily f({CategoricalStep::uniform(3), CategoricalStep::uniform(3)});
  const std::vector<std::vector<std::size_t>> elite{{0, 1}, {2, 1}, {0, 0}};
  const std::vector<double> w(3, 1.0);
  const auto once = f.refit(elite, w).blend(f, 1.0);
  const auto twice = once.refit(elite, w).blend(once, 1.0);
  EXPECT_EQ(once.digest(), twice.digest());
}

class PairSearch : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_ = fixtures::reference_config();
    cfg_.ce.seed = 42;
  }
  hybridpair::cli::RunConfig cfg_;
};

TEST_F(PairSearch, ReturnsACompliantPair) {
  const auto r = hybrid_pair_search(cfg_.ce, cfg_.scenario, cfg_.cost, DatasetStats{});
  EXPECT_FALSE(r.pair.vanilla.trace.collision);
  EXPECT_TRUE(r.pair.perturbed.trace.collision);
  EXPECT_GE(*r.pair.perturbed.trace.t_collision, cfg_.cost.min_collision_time);
  EXPECT_LE(pair_components(r.pair.vanilla.path, r.pair.perturbed.path).raw(), 2.0);
  EXPECT_EQ(rigid_constraints(r.pair, cfg_.cost), 0.0);
  EXPECT_LT(r.cost.total, 0.0);
  EXPECT_LE(r.iteration, r.state.history.size());
  for (const auto& h : r.state.history) EXPECT_EQ(h.elite_size, cfg_.ce.elite_size());
}

TEST_F(PairSearch, InfeasibleStartShowsInTheFirstGamma) {
  const auto r = hybrid_pair_search(cfg_.ce, cfg_.scenario, cfg_.cost, DatasetStats{});
  ASSERT_FALSE(r.state.history.empty());
  EXPECT_GT(r.state.history.front().gamma, 0.99e9);
}

TEST_F(PairSearch, DeterministicForAFixedSeed) {
  const auto a = hybrid_pair_search(cfg_.ce, cfg_.scenario, cfg_.cost, DatasetStats{});
  const auto b = hybrid_pair_search(cfg_.ce, cfg_.scenario, cfg_.cost, DatasetStats{});
  EXPECT_EQ(a.pair.vanilla.path, b.pair.vanilla.path);
  EXPECT_EQ(a.pair.perturbed.trace, b.pair.perturbed.trace);
  EXPECT_EQ(a.state.history.back().params_digest, b.state.history.back().params_digest);
}

TEST_F(PairSearch, GammaMostlyNonIncreasing) {
  // Soft trend over several searches; CE is stochastic.
  std::size_t steps = 0, down = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    cfg_.ce.seed = seed;
    try {
      const auto r = hybrid_pair_search(cfg_.ce, cfg_.scenario, cfg_.cost, DatasetStats{});
      const auto& h = r.state.history;
      for (std::size_t i = 1; i < h.size(); ++i) {
        ++steps;
        down += h[i].gamma <= h[i - 1].gamma ? 1 : 0;
      }
    } catch (const SearchExhausted&) {
    }
  }
  ASSERT_GT(steps, 0u);
  EXPECT_GE(static_cast<double>(down) / static_cast<double>(steps), 0.8);
}

TEST_F(PairSearch, ExhaustionCarriesTheHistory) {
  cfg_.scenario.adversary = {{150, 9}, 20.0};
  cfg_.ce.max_iterations = 2;
  cfg_.ce.batch_size = 20;
  try {
    hybrid_pair_search(cfg_.ce, cfg_.scenario, cfg_.cost, DatasetStats{});
    FAIL();
  } catch (const SearchExhausted& e) {
    EXPECT_STREQ(e.what(), "search-exhausted");
    EXPECT_EQ(e.state().history.size(), 2u);
  }
}
