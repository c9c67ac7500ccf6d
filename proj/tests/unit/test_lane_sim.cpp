#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "hybridpair/lane_sim.hpp"
#include "hybridpair/rng.hpp"

using namespace hybridpair;

namespace {

constexpr double kPi = std::numbers::pi;

VehicleState box_at(double x, double y, double heading = 0.0, double length = 5.0,
                    double width = 2.0) {
  VehicleState s;
  s.x = x;
  s.y = y;
  s.heading = heading;
  s.length = length;
  s.width = width;
  return s;
}

/// Adversary parked in the ego lane 85 m ahead; the independent adversary is far away.
ScenarioConfig intercept_scenario(double timestep = 0.1) {
  ScenarioConfig cfg;
  cfg.timestep = timestep;
  cfg.ego_lane = 1;
  cfg.ego_start_x = 50.5;
  cfg.ego_cruise_speed = 20.0;
  cfg.brake_decel = 0.0;
  cfg.adversary = {{27, 2}, 0.0};
  cfg.independent = {{100, 9}, 20.0};
  return cfg;
}

HybridPath stay(const ScenarioConfig& cfg) { return constant_path(cfg.path_steps(), Move::stay, 0.0); }

}  // namespace

TEST(RunScenario, SeparateLanesNeverMeet) {
  ScenarioConfig cfg;
  cfg.adversary = {{10, 7}, 20.0};
  const auto trace = run_scenario(cfg, stay(cfg), stay(cfg));
  EXPECT_FALSE(trace.collision);
  EXPECT_EQ(trace.outcome, Outcome::completed);
  EXPECT_GE(trace.min_distance, cfg.map.lane_width());
  EXPECT_EQ(trace.samples.size(), cfg.sample_count());
}

TEST(RunScenario, StraightLineInterceptMatchesHandKinematics) {
  // Ego front reaches the parked car's rear when 50.5 + 20 t + 2.25 = 135 - 2.25, t = 4 s.
  const auto cfg = intercept_scenario();
  const auto trace = run_scenario(cfg, stay(cfg), stay(cfg));
  ASSERT_TRUE(trace.collision);
  ASSERT_TRUE(trace.t_collision);
  EXPECT_NEAR(*trace.t_collision, 4.0, cfg.timestep + 1e-9);
  EXPECT_EQ(trace.outcome, Outcome::collision);
  EXPECT_TRUE(detect_collision(trace.samples.back().ego, trace.samples.back().adv));
  EXPECT_DOUBLE_EQ(trace.samples.back().t, *trace.t_collision);
}

TEST(RunScenario, HalvingTheTimestepMovesContactByAtMostOneCoarseStep) {
  const auto coarse = intercept_scenario(0.1);
  const auto fine = intercept_scenario(0.05);
  const auto a = run_scenario(coarse, stay(coarse), stay(coarse));
  const auto b = run_scenario(fine, stay(fine), stay(fine));
  ASSERT_TRUE(a.t_collision && b.t_collision);
  EXPECT_LE(std::abs(*a.t_collision - *b.t_collision), 0.1 + 1e-9);
}

TEST(RunScenario, CutInWithLinearLateralMotion) {
  // Adversary alongside the ego in the left half of the next lane moves one cell right
  // during [3, 4] s. Axis-aligned boxes touch at t = 3 + (7.875 - 7.05) / 1.75 = 3.47 s;
  // the yawed box reaches about 0.2 m further, which moves contact to roughly 3.36 s.
  ScenarioConfig cfg;
  cfg.lateral_speed = 0.0;
  cfg.vehicle_width = 1.8;
  cfg.vehicle_length = 4.5;
  cfg.adversary = {{10, 4}, 20.0};
  cfg.independent = {{100, 9}, 20.0};
  const auto adv = scripted_encroachment(cfg.path_steps(), 3);
  const auto trace = run_scenario(cfg, adv, stay(cfg));
  ASSERT_TRUE(trace.t_collision);
  EXPECT_GE(*trace.t_collision, 3.3 - 1e-9);
  EXPECT_LE(*trace.t_collision, 3.5 + 1e-9);
}

TEST(RunScenario, LateralRateLimitDelaysTheCutIn) {
  ScenarioConfig cfg;
  cfg.adversary = {{10, 4}, 20.0};
  cfg.independent = {{100, 9}, 20.0};
  const auto adv = scripted_encroachment(cfg.path_steps(), 3);
  cfg.lateral_speed = 0.0;
  const auto fast = run_scenario(cfg, adv, stay(cfg));
  cfg.lateral_speed = 0.5;
  const auto slow = run_scenario(cfg, adv, stay(cfg));
  ASSERT_TRUE(fast.t_collision && slow.t_collision);
  EXPECT_GT(*slow.t_collision, *fast.t_collision + 0.5);
  for (const auto& s : slow.samples) EXPECT_LE(std::abs(s.adv.velocity.y), 0.5 + 1e-12);
}

TEST(RunScenario, SameInputsSameTraceBytes) {
  ScenarioConfig cfg;
  Rng rng(4);
  const auto p = cfg.adversary_params();
  for (int i = 0; i < 20; ++i) {
    const auto adv = sample_path(p, rng.next_u64());
    const auto ind = sample_path(cfg.independent_params(), rng.next_u64());
    const auto a = run_scenario(cfg, adv, ind);
    const auto b = run_scenario(cfg, adv, ind);
    ASSERT_EQ(a, b);
    std::ostringstream sa, sb;
    write_trace_csv(sa, a);
    write_trace_csv(sb, b);
    ASSERT_EQ(sa.str(), sb.str());
  }
}

TEST(RunScenario, SampleTimesAreWholeTimesteps) {
  ScenarioConfig cfg;
  cfg.adversary = {{10, 7}, 20.0};
  const auto trace = run_scenario(cfg, stay(cfg), stay(cfg));
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    ASSERT_EQ(trace.samples[k].t, static_cast<double>(k) * cfg.timestep);
  }
}

TEST(RunScenario, LeavingTheRoadTruncatesTheTrace) {
  ScenarioConfig cfg;
  cfg.adversary = {{10, 9}, 20.0};
  const auto adv = constant_path(cfg.path_steps(), Move::left, 0.0);
  const auto trace = run_scenario(cfg, adv, stay(cfg));
  EXPECT_TRUE(trace.off_road());
  EXPECT_FALSE(trace.collision);
  EXPECT_LT(trace.samples.size(), cfg.sample_count());
}

TEST(RunScenario, EgoBrakesForAVehicleCloseAhead) {
  auto cfg = intercept_scenario();
  cfg.brake_decel = 6.0;
  const auto trace = run_scenario(cfg, stay(cfg), stay(cfg));
  bool braked = false;
  for (const auto& s : trace.samples) braked = braked || s.ego.acceleration.x < -1.0;
  EXPECT_TRUE(braked);
}

TEST(RunScenario, RejectsInvalidConfigAndPaths) {
  ScenarioConfig cfg;
  cfg.timestep = 0.2;
  EXPECT_THROW(run_scenario(cfg, stay(cfg), stay(cfg)), std::invalid_argument);
  ScenarioConfig ok;
  EXPECT_THROW(run_scenario(ok, constant_path(3, Move::stay, 0.0), stay(ok)), std::invalid_argument);
  ScenarioConfig narrow;
  narrow.map.lanes = 1;
  EXPECT_THROW(narrow.validate(), std::invalid_argument);
}

TEST(DetectCollision, HandCases) {
  EXPECT_TRUE(detect_collision(box_at(0, 0), box_at(0, 0)));
  EXPECT_FALSE(detect_collision(box_at(0, 0), box_at(100, 0)));
  // Edge to edge along x, and along y.
  EXPECT_TRUE(detect_collision(box_at(0, 0), box_at(5.0, 0)));
  EXPECT_TRUE(detect_collision(box_at(0, 0), box_at(0, 2.0)));
  EXPECT_FALSE(detect_collision(box_at(0, 0), box_at(5.01, 0)));
  EXPECT_TRUE(detect_collision(box_at(0, 0), box_at(5.01, 0), 0.01));
}

TEST(DetectCollision, RotatedBoxUsesItsOwnAxes) {
  // A 5x2 box turned 90 degrees reaches 2.5 m in y and 1 m in x; the
  // axis-aligned 5x2 box reaches 1 m in y and 2.5 m in x.
  const auto upright = box_at(0, 0, kPi / 2);
  EXPECT_TRUE(detect_collision(upright, box_at(0, 3.4)));
  EXPECT_FALSE(detect_collision(upright, box_at(0, 3.6)));
  EXPECT_TRUE(detect_collision(upright, box_at(3.45, 0)));
  EXPECT_FALSE(detect_collision(upright, box_at(3.6, 0)));
  // The nearest corner (0.9, 0.9) sits 1.27 m along the diagonal, beyond the
  // diamond's 1 m half side, although the bounding boxes overlap.
  const auto diamond = box_at(0, 0, kPi / 4, 2.0, 2.0);
  EXPECT_FALSE(detect_collision(diamond, box_at(1.4, 1.4, 0.0, 1.0, 1.0)));
  EXPECT_TRUE(detect_collision(diamond, box_at(1.1, 1.1, 0.0, 1.0, 1.0)));
}

TEST(DetectCollision, Symmetric) {
  Rng rng(12);
  for (int i = 0; i < 2000; ++i) {
    const auto a = box_at(rng.uniform() * 10, rng.uniform() * 10, rng.uniform() * 2 * kPi,
                          1 + rng.uniform() * 5, 1 + rng.uniform() * 2);
    const auto b = box_at(rng.uniform() * 10, rng.uniform() * 10, rng.uniform() * 2 * kPi,
                          1 + rng.uniform() * 5, 1 + rng.uniform() * 2);
    ASSERT_EQ(detect_collision(a, b), detect_collision(b, a));
  }
}

TEST(RelativeGeometry, BearingAndDistance) {
  const auto origin = box_at(0, 0);
  EXPECT_NEAR(relative_geometry(origin, box_at(10, 0)).angle, 0.0, 1e-15);
  EXPECT_NEAR(relative_geometry(origin, box_at(0, 10)).angle, kPi / 2, 1e-15);
  EXPECT_NEAR(relative_geometry(origin, box_at(-10, 0)).angle, kPi, 1e-15);
  EXPECT_DOUBLE_EQ(relative_geometry(origin, box_at(3, 4)).distance, 5.0);
  EXPECT_NEAR(relative_geometry(box_at(0, 0, kPi / 2), box_at(0, 7)).angle, 0.0, 1e-15);
}

TEST(WrapAngle, HalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(2.5 * kPi), 0.5 * kPi, 1e-12);
}

TEST(TraceCsv, RoundTrip) {
  const auto cfg = intercept_scenario();
  const auto trace = run_scenario(cfg, stay(cfg), stay(cfg));
  std::stringstream buf;
  write_trace_csv(buf, trace);
  EXPECT_EQ(read_trace_csv(buf), trace);
  EXPECT_EQ(trace_columns().size(), 42u);
}

TEST(TraceCsv, RejectsMalformedNumbers) {
  const auto cfg = intercept_scenario();
  const auto trace = run_scenario(cfg, stay(cfg), stay(cfg));
  std::stringstream buf;
  write_trace_csv(buf, trace);
  auto text = buf.str();
  text.replace(text.rfind(',') + 1, 1, "x");
  std::istringstream in(text);
  EXPECT_THROW(read_trace_csv(in), std::runtime_error);
}
