#pragma once

#include <array>
#include <optional>

#include "hybridpair/hybrid_dist.hpp"
#include "hybridpair/lane_sim.hpp"

namespace hybridpair {

struct CostWeights {
  double a1 = 3.0;  // categorical
  double a2 = 2.0;  // gaussian
  double a3 = 2.0;  // pair distance
  double a4 = 1.0;  // dataset variance

  void validate() const;
};

struct CostConfig {
  CostWeights weights;
  double pair_threshold = 2.0;  // bound on raw d_loc + d_acc for a valid pair
  double penalty = 1e9;         // added once per violated rigid constraint
  double pair_epsilon = 0.1;
  double variance_epsilon = 0.1;
  double accel_scale = 10.0;  // m/s^2 normaliser for acceleration differences
  /// Perturbed collisions earlier than this do not satisfy the collision constraint.
  double min_collision_time = 0.0;

  void validate() const;
};

enum class PathClass { vanilla = 0, perturbed = 1 };
enum class PathScalar { location = 0, acceleration = 1 };

struct ShellStats {
  double mean = 0.0;
  double std = 0.0;
};

/// Archive mean/std of the two path scalars for the vanilla and perturbed classes.
/// An entry is absent until its class holds at least two paths.
struct DatasetStats {
  std::array<std::optional<ShellStats>, 4> entries{};

  static constexpr std::size_t index(PathClass c, PathScalar s) {
    return 2 * static_cast<std::size_t>(c) + static_cast<std::size_t>(s);
  }
  const std::optional<ShellStats>& at(PathClass c, PathScalar s) const { return entries[index(c, s)]; }
  std::optional<ShellStats>& at(PathClass c, PathScalar s) { return entries[index(c, s)]; }
  bool empty() const;
};

/// Path together with the trace it produced.
struct SimulatedPath {
  HybridPath path;
  SimTrace trace;
};

struct PairCandidate {
  SimulatedPath vanilla;
  SimulatedPath perturbed;
};

struct PathScalars {
  double chi_location = 0.0;      // mean signed lateral offset from the start column, cells
  double chi_acceleration = 0.0;  // mean acceleration, m/s^2
};

struct PairDistance {
  double location = 0.0;      // mean per-step grid distance, cells
  double acceleration = 0.0;  // mean |delta a| / accel_scale

  double raw() const { return location + acceleration; }
};

struct CostBreakdown {
  double categorical = 0.0;
  double gaussian = 0.0;
  double distance = 0.0;
  double variance = 0.0;
  double rigid = 0.0;
  double total = 0.0;
  int violations = 0;
  double raw_distance = 0.0;

  bool compliant() const { return violations == 0; }
};

/// Fraction of steps that move to a different cell.
double categorical_cost(const HybridPath& path);

/// Mean shortfall below zero of the unclamped integrated speed, over max speed.
double gaussian_cost(const HybridPath& path, const SimTrace& trace);

PairDistance pair_components(const HybridPath& a, const HybridPath& b, double accel_scale = 10.0);

/// -1 / (eps + d_loc + d_acc); closer pairs are more negative.
double pair_distance(const PairCandidate& pair, const CostConfig& cfg = {});

PathScalars path_scalars(const HybridPath& path);

double variance_cost(const PairCandidate& pair, const DatasetStats& stats, const CostConfig& cfg = {});

/// Number of violated rigid constraints.
int rigid_violations(const PairCandidate& pair, const CostConfig& cfg = {});

double rigid_constraints(const PairCandidate& pair, const CostConfig& cfg = {});

/// True when the trace ends in an ego collision at or after cfg.min_collision_time.
bool admissible_collision(const SimTrace& trace, const CostConfig& cfg);

CostBreakdown total_cost(const PairCandidate& pair, const DatasetStats& stats, const CostConfig& cfg = {});

}  // namespace hybridpair
