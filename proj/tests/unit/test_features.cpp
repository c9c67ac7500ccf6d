#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hybridpair/features.hpp"

using namespace hybridpair;

namespace {

constexpr std::size_t kEgoVelX = 6;

/// 12 s trace at 0.1 s whose ego x-velocity equals the sample time.
SimTrace clock_trace(double horizon = 12.0) {
  SimTrace trace;
  trace.timestep = 0.1;
  const auto n = static_cast<std::size_t>(std::llround(horizon / 0.1)) + 1;
  for (std::size_t k = 0; k < n; ++k) {
    TraceSample s;
    s.t = static_cast<double>(k) * 0.1;
    s.ego.velocity.x = s.t;
    s.adv.x = 10.0;
    s.ind.y = 3.5;
    trace.samples.push_back(s);
  }
  return trace;
}

PathRecord record_of(PathKind kind, SimTrace trace, std::optional<double> t_collision = {}) {
  PathRecord r;
  r.kind = kind;
  r.label = label_for(kind);
  r.path = constant_path(12, Move::stay, 0.0);
  r.independent = r.path;
  r.trace = std::move(trace);
  r.trace.collision = t_collision.has_value();
  r.trace.outcome = t_collision ? Outcome::collision : Outcome::completed;
  r.trace.t_collision = t_collision;
  return r;
}

/// Two vanilla/perturbed pairs plus rudimentary records, built by hand.
Archive small_archive() {
  Archive a;
  for (int i = 0; i < 6; ++i) {
    auto trace = clock_trace();
    for (auto& s : trace.samples) s.adv.x = 10.0 + i;
    a.add(record_of(i % 2 == 0 ? PathKind::rudimentary : PathKind::vanilla, trace));
  }
  return a;
}

}  // namespace

TEST(FeatureNames, ThirtyThreeInSchemaOrder) {
  const auto& names = feature_names();
  ASSERT_EQ(names.size(), 33u);
  EXPECT_EQ(names[0], "ego_adv_distance");
  EXPECT_EQ(names[5], "adv_ind_angle");
  EXPECT_EQ(names[kEgoVelX], "ego_vel_x");
  EXPECT_EQ(names[32], "ind_angvel_z");
  std::set<std::string> unique(names.begin(), names.end());
  EXPECT_EQ(unique.size(), 33u);
}

TEST(SampleFeatures, GeometryAndKinematics) {
  TraceSample s;
  s.adv.x = 3.0;
  s.adv.y = 4.0;
  s.ind.x = -2.0;
  s.ego.velocity = {20.0, 0.5, 0.0};
  s.adv.angular_velocity = {0.0, 0.0, 0.25};
  const auto f = sample_features(s);
  EXPECT_DOUBLE_EQ(f[0], 5.0);
  EXPECT_NEAR(f[1], std::atan2(4.0, 3.0), 1e-15);
  EXPECT_DOUBLE_EQ(f[2], 2.0);
  EXPECT_NEAR(f[3], std::numbers::pi, 1e-15);
  EXPECT_DOUBLE_EQ(f[6], 20.0);
  EXPECT_DOUBLE_EQ(f[7], 0.5);
  EXPECT_DOUBLE_EQ(f[23], 0.25);
}

TEST(WindowSpec, SampleCountsAndValidation) {
  EXPECT_EQ((WindowSpec{1.0, 2.0, 0.5}).row_length(), 165u);
  EXPECT_EQ((WindowSpec{1.0, 2.0, 0.2}).row_length(), 363u);
  EXPECT_EQ((WindowSpec{1.0, 0.5, 0.5}).row_length(), 66u);
  EXPECT_THROW((WindowSpec{1.0, 2.0, 0.3}).validate(), std::invalid_argument);
  EXPECT_THROW((WindowSpec{-1.0, 2.0, 0.2}).validate(), std::invalid_argument);
  EXPECT_THROW((WindowSpec{1.0, 0.0, 0.2}).validate(), std::invalid_argument);
  const auto cols = WindowSpec{1.0, 2.0, 0.5}.columns();
  EXPECT_EQ(cols.front(), "ego_adv_distance_0");
  EXPECT_EQ(cols.back(), "ind_angvel_z_4");
}

TEST(ExtractValues, SamplesTheWindowBeforeTheAnchor) {
  // Anchor 5 s, X = 1, Y = 2, R = 0.5: samples at 2.0, 2.5, ..., 4.0.
  const auto trace = clock_trace();
  const auto v = extract_values(trace, {1.0, 2.0, 0.5}, 5.0);
  ASSERT_EQ(v.size(), 165u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_NEAR(v[k * kFeatureCount + kEgoVelX], 2.0 + 0.5 * static_cast<double>(k), 1e-12);
  }
  EXPECT_EQ(extract_values(trace, {1.0, 2.0, 0.2}, 5.0).size(), 363u);
}

TEST(ExtractValues, WindowBeforeTheTraceStartIsOutOfRange) {
  const auto trace = clock_trace();
  EXPECT_THROW(extract_values(trace, {1.0, 2.0, 0.2}, 2.5), WindowOutOfRange);
  EXPECT_NO_THROW(extract_values(trace, {1.0, 2.0, 0.2}, 3.0));
  EXPECT_THROW(extract_values(trace, {0.0, 2.0, 0.2}, 12.5), WindowOutOfRange);
  try {
    extract_values(trace, {1.0, 2.0, 0.2}, 2.5);
  } catch (const WindowOutOfRange& e) {
    EXPECT_EQ(std::string(e.what()).rfind("window-out-of-range", 0), 0u);
  }
}

TEST(ExtractValues, OffGridSampleTimesAreRejected) {
  EXPECT_THROW(extract_values(clock_trace(), {1.0, 2.0, 0.2}, 5.05), std::invalid_argument);
}

TEST(AnchorTime, Rules) {
  const auto perturbed = record_of(PathKind::perturbed, clock_trace(), 8.3);
  EXPECT_DOUBLE_EQ(anchor_time(perturbed, 9.0, 11.0), 8.3);
  const auto vanilla = record_of(PathKind::vanilla, clock_trace());
  EXPECT_DOUBLE_EQ(anchor_time(vanilla, 9.0, 11.0), 9.0);
  EXPECT_DOUBLE_EQ(anchor_time(vanilla, std::nullopt, 11.0), 11.0);

  auto broken = perturbed;
  broken.trace.t_collision.reset();
  EXPECT_THROW(anchor_time(broken, 9.0, 11.0), std::invalid_argument);
}

TEST(BuildMatrix, ShapeLabelsAndOrder) {
  const auto a = small_archive();
  const WindowSpec spec{1.0, 2.0, 0.2};
  const auto m = build_matrix(a, {5, 0, 3, 1}, spec);
  EXPECT_EQ(m.rows(), 4u);
  EXPECT_EQ(m.cols(), 363u);
  EXPECT_EQ(m.record_ids, (std::vector<std::size_t>{0, 1, 3, 5}));
  for (const double anchor : m.anchors) EXPECT_DOUBLE_EQ(anchor, 11.0);

  const auto shuffled = build_matrix(a, {3, 1, 5, 0}, spec);
  EXPECT_EQ(shuffled.digest(), m.digest());

  const auto empty = build_matrix(a, {}, spec);
  EXPECT_EQ(empty.rows(), 0u);
  EXPECT_EQ(empty.cols(), 363u);
}

TEST(BuildMatrix, NothingAfterTheWindowLeaksIn) {
  // Overwrite every sample after anchor - X; the row must not change.
  Archive a;
  a.add(record_of(PathKind::rudimentary, clock_trace()));
  auto altered = clock_trace();
  for (auto& s : altered.samples) {
    if (s.t > 11.0 - 1.0 + 1e-9) s.ego.velocity.x = -99.0;
  }
  a.add(record_of(PathKind::rudimentary, altered));
  const auto m = build_matrix(a, {0, 1}, {1.0, 2.0, 0.2});
  EXPECT_TRUE(std::equal(m.row(0), m.row(0) + m.cols(), m.row(1)));
}

TEST(BuildMatrix, PairedVanillaSharesTheCollisionAnchor) {
  const ScenarioConfig cfg;
  const auto params = cfg.adversary_params();
  const ParamsTrio trio{params, params, cfg.independent_params()};
  PairCandidate pair{{constant_path(12, Move::stay, 0.0), clock_trace()},
                     {constant_path(12, Move::stay, 0.0), clock_trace()}};
  pair.perturbed.trace.collision = true;
  pair.perturbed.trace.outcome = Outcome::collision;
  pair.perturbed.trace.t_collision = 7.5;
  const PairSearchResult result{pair, constant_path(12, Move::stay, 0.0), {},
                                PairSearchState{trio, trio, {}, {}}, 1, 0};
  Archive a;
  a.add_pair(result, trio);
  const auto m = build_matrix(a, {0, 1}, {1.0, 2.0, 0.5});
  EXPECT_DOUBLE_EQ(m.anchors[0], 7.5);
  EXPECT_DOUBLE_EQ(m.anchors[1], 7.5);
  EXPECT_EQ(m.labels, (std::vector<int>{0, 1}));
  EXPECT_NEAR(m.row(0)[kEgoVelX], 4.5, 1e-12);
}

TEST(BuildMatrix, OutOfRangeNamesTheRecord) {
  Archive a;
  a.add(record_of(PathKind::rudimentary, clock_trace(2.0)));
  try {
    build_matrix(a, {0}, {1.0, 2.0, 0.2});
    FAIL();
  } catch (const WindowOutOfRange& e) {
    EXPECT_NE(std::string(e.what()).find("record 0"), std::string::npos);
  }
}

TEST(MatrixCsv, RoundTrip) {
  const auto m = build_matrix(small_archive(), {0, 1, 2, 3}, {1.0, 2.0, 0.5});
  std::stringstream buf;
  write_matrix_csv(buf, m);
  const auto back = read_matrix_csv(buf);
  EXPECT_EQ(back.columns, m.columns);
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(back.labels, m.labels);
  EXPECT_EQ(back.schema_digest(), m.schema_digest());
  EXPECT_EQ(back.digest(), m.digest());
}

TEST(MatrixCsv, RejectsBadLabels) {
  std::istringstream in("a,b,label\n1,2,3\n");
  EXPECT_THROW(read_matrix_csv(in), std::invalid_argument);
  std::istringstream no_label("a,b\n1,2\n");
  EXPECT_THROW(read_matrix_csv(no_label), std::invalid_argument);
}

TEST(FeatureMatrix, SubsetAndSchema) {
  const auto m = build_matrix(small_archive(), {0, 1, 2}, {1.0, 2.0, 0.5});
  const auto s = m.subset({2, 0});
  EXPECT_EQ(s.record_ids, (std::vector<std::size_t>{2, 0}));
  EXPECT_TRUE(std::equal(s.row(0), s.row(0) + s.cols(), m.row(2)));
  EXPECT_EQ(s.schema_digest(), m.schema_digest());
  FeatureRow bad{{1.0}, 0, 0, 0.0};
  FeatureMatrix copy = m;
  EXPECT_THROW(copy.push_back(bad), std::invalid_argument);
}
