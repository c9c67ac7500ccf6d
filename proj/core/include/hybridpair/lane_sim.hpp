#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hybridpair/hybrid_dist.hpp"

namespace hybridpair {

/// Multi-lane straight road split into cells one vehicle long and half a lane wide.
/// Column 0 is the right edge; lane `l` covers columns 2l and 2l+1.
struct GridMap {
  int lanes = 5;
  double cell_length = 5.0;  // m
  double cell_width = 1.75;  // m
  int road_cells = 200;

  int columns() const { return 2 * lanes; }
  double lane_width() const { return 2.0 * cell_width; }
  double road_length() const { return road_cells * cell_length; }
  double column_center_y(int column) const { return (column + 0.5) * cell_width; }
  double lane_center_y(int lane) const { return (2 * lane + 1) * cell_width; }
  double cell_center_x(int lon) const { return lon * cell_length; }

  void validate() const;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// Planar vehicle state. z components are carried for the telemetry schema and stay 0.
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  Vec3 velocity;
  Vec3 acceleration;
  Vec3 angular_velocity;
  double heading = 0.0;  // rad, 0 along +x
  double length = 4.5;
  double width = 1.8;

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct GridCell {
  int lon = 0;
  int column = 0;
};

/// Start cell and initial speed of a path-following vehicle.
struct AgentStart {
  GridCell cell;
  double speed = 20.0;  // m/s
};

/// Stationary initial distribution used to build a vehicle's first HybridParams.
struct InitialDistribution {
  std::array<double, kMoveCount> move_probs{0.7, 0.1, 0.05, 0.05, 0.05, 0.05};
  double accel_mean = 0.0;
  double accel_var = 1.25;
};

struct ScenarioConfig {
  GridMap map;
  int ego_lane = 1;
  double ego_start_x = 50.0;
  double ego_cruise_speed = 20.0;
  AgentStart adversary{{11, 4}, 21.0};
  AgentStart independent{{20, 5}, 20.0};
  InitialDistribution adversary_init;
  InitialDistribution independent_init{{0.8, 0.1, 0.025, 0.025, 0.025, 0.025}, 0.0, 0.25};
  double timestep = 0.1;       // s
  double horizon = 12.0;       // s
  double step_duration = 1.0;  // s per path step
  double collision_inflation = 0.0;
  /// Bound on lateral speed while tracking the commanded column, m/s.
  /// 0 moves between column centres linearly within each step.
  double lateral_speed = 0.5;
  double vehicle_length = 4.5;
  double vehicle_width = 1.8;
  double max_speed = 40.0;
  double brake_decel = 6.0;
  double brake_range_lengths = 1.5;
  double resume_accel = 2.0;

  /// Number of path steps, horizon / step_duration.
  std::size_t path_steps() const;
  std::size_t sample_count() const;
  void validate() const;

  HybridParams adversary_params() const;
  HybridParams independent_params() const;
};

enum class Outcome { completed, collision, off_road };

std::string_view outcome_name(Outcome outcome);
Outcome outcome_from_name(std::string_view name);

struct TraceSample {
  double t = 0.0;
  VehicleState ego;
  VehicleState adv;
  VehicleState ind;

  friend bool operator==(const TraceSample&, const TraceSample&) = default;
};

/// Fixed-timestep telemetry of one run.
struct SimTrace {
  std::vector<TraceSample> samples;
  Outcome outcome = Outcome::completed;
  bool collision = false;
  std::optional<double> t_collision;
  double min_distance = 0.0;  // closest ego-adversary centre distance, m
  double timestep = 0.1;
  double step_duration = 1.0;
  double adv_initial_speed = 0.0;
  double max_speed = 40.0;

  bool off_road() const { return outcome == Outcome::off_road; }
  double end_time() const { return samples.empty() ? 0.0 : samples.back().t; }

  friend bool operator==(const SimTrace&, const SimTrace&) = default;
};

/// Simulates ego, adversary and independent adversary over the scenario horizon.
/// The ego cruises in its lane and brakes when a vehicle sits close ahead; the
/// two adversaries follow their paths. The run stops at the first ego/adversary
/// contact or when a path leaves the road.
SimTrace run_scenario(const ScenarioConfig& cfg, const HybridPath& adv_path,
                      const HybridPath& ind_path);

/// Separating-axis overlap test of the two oriented boxes, each grown by
/// `inflation` on every side. Touching boxes count as overlapping.
bool detect_collision(const VehicleState& a, const VehicleState& b, double inflation = 0.0);

struct RelativeGeometry {
  double distance = 0.0;  // m
  double angle = 0.0;     // rad in (-pi, pi], bearing of b from a's heading
};

RelativeGeometry relative_geometry(const VehicleState& a, const VehicleState& b);

double wrap_angle(double angle);

/// A path that keeps its lane except for one `right` move at `step`.
HybridPath scripted_encroachment(std::size_t horizon, std::size_t step, double accel = 0.0);

/// Path with the same move and acceleration at every step.
HybridPath constant_path(std::size_t horizon, Move move, double accel);

/// Column order of trace files, after the leading `t` column.
const std::vector<std::string>& trace_columns();

/// Writes `#key=value` metadata lines, a header row and one CSV row per sample.
void write_trace_csv(std::ostream& out, const SimTrace& trace);
SimTrace read_trace_csv(std::istream& in);

}  // namespace hybridpair
