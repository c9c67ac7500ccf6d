#include "hybridpair/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hybridpair {
namespace {

struct GridPoint {
  int lon = 0;
  int lat = 0;
};

/// Cell offset from the start after each move.
std::vector<GridPoint> grid_positions(const HybridPath& path) {
  std::vector<GridPoint> out;
  out.reserve(path.horizon());
  GridPoint p;
  for (const auto m : path.moves) {
    const GridDelta d = move_delta(m);
    p.lon += d.lon;
    p.lat += d.lat;
    out.push_back(p);
  }
  return out;
}

}  // namespace

void CostWeights::validate() const {
  for (const double a : {a1, a2, a3, a4}) {
    if (!std::isfinite(a) || a < 0.0) throw std::invalid_argument("cost weights must be finite and >= 0");
  }
}

void CostConfig::validate() const {
  weights.validate();
  if (!(pair_threshold >= 0.0)) throw std::invalid_argument("pair_threshold must be >= 0");
  if (!(penalty > 0.0)) throw std::invalid_argument("penalty must be positive");
  if (!(pair_epsilon > 0.0) || !(variance_epsilon > 0.0)) {
    throw std::invalid_argument("epsilons must be positive");
  }
  if (!(accel_scale > 0.0)) throw std::invalid_argument("accel_scale must be positive");
  if (min_collision_time < 0.0) throw std::invalid_argument("min_collision_time must be >= 0");
}

bool DatasetStats::empty() const {
  return std::none_of(entries.begin(), entries.end(), [](const auto& e) { return e.has_value(); });
}

double categorical_cost(const HybridPath& path) {
  if (path.horizon() == 0) return 0.0;
  const auto moving = std::count_if(path.moves.begin(), path.moves.end(),
                                    [](std::uint8_t m) { return m != static_cast<std::uint8_t>(Move::stay); });
  return static_cast<double>(moving) / static_cast<double>(path.horizon());
}

double gaussian_cost(const HybridPath& path, const SimTrace& trace) {
  if (trace.samples.empty() || path.horizon() == 0) return 0.0;
  double raw_speed = trace.adv_initial_speed;
  double shortfall = 0.0;
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    if (k > 0) {
      const double t_prev = trace.samples[k - 1].t;
      auto s = static_cast<std::size_t>(std::floor(t_prev / trace.step_duration + 1e-9));
      s = std::min(s, path.horizon() - 1);
      raw_speed += path.accels[s] * (trace.samples[k].t - t_prev);
    }
    shortfall += std::max(0.0, -raw_speed);
  }
  return shortfall / static_cast<double>(trace.samples.size()) / trace.max_speed;
}

PairDistance pair_components(const HybridPath& a, const HybridPath& b, double accel_scale) {
  if (a.horizon() != b.horizon()) throw std::invalid_argument("pair paths differ in horizon");
  if (a.horizon() == 0) return {};
  const auto pa = grid_positions(a);
  const auto pb = grid_positions(b);
  double loc = 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < a.horizon(); ++t) {
    loc += std::hypot(static_cast<double>(pa[t].lon - pb[t].lon),
                      static_cast<double>(pa[t].lat - pb[t].lat));
    acc += std::abs(a.accels[t] - b.accels[t]);
  }
  const auto n = static_cast<double>(a.horizon());
  return {loc / n, acc / n / accel_scale};
}

double pair_distance(const PairCandidate& pair, const CostConfig& cfg) {
  const auto d = pair_components(pair.vanilla.path, pair.perturbed.path, cfg.accel_scale);
  return -1.0 / (cfg.pair_epsilon + d.raw());
}

PathScalars path_scalars(const HybridPath& path) {
  if (path.horizon() == 0) return {};
  double lat_sum = 0.0;
  double acc_sum = 0.0;
  int lat = 0;
  for (std::size_t t = 0; t < path.horizon(); ++t) {
    lat += move_delta(path.moves[t]).lat;
    lat_sum += lat;
    acc_sum += path.accels[t];
  }
  const auto n = static_cast<double>(path.horizon());
  return {lat_sum / n, acc_sum / n};
}

double variance_cost(const PairCandidate& pair, const DatasetStats& stats, const CostConfig& cfg) {
  double sum = 0.0;
  int terms = 0;
  for (const PathClass c : {PathClass::vanilla, PathClass::perturbed}) {
    const auto chi = path_scalars(c == PathClass::vanilla ? pair.vanilla.path : pair.perturbed.path);
    for (const PathScalar s : {PathScalar::location, PathScalar::acceleration}) {
      const auto& shell = stats.at(c, s);
      if (!shell) continue;
      const double x = s == PathScalar::location ? chi.chi_location : chi.chi_acceleration;
      const double upper = shell->mean + 2.0 * shell->std;
      const double lower = shell->mean - 2.0 * shell->std;
      sum += std::min(std::abs(x - upper), std::abs(x - lower)) / (shell->std + cfg.variance_epsilon);
      ++terms;
    }
  }
  return terms == 0 ? 0.0 : sum / terms;
}

bool admissible_collision(const SimTrace& trace, const CostConfig& cfg) {
  return trace.collision && trace.t_collision && *trace.t_collision >= cfg.min_collision_time - 1e-9;
}

int rigid_violations(const PairCandidate& pair, const CostConfig& cfg) {
  int violations = 0;
  if (pair.vanilla.trace.collision) ++violations;
  if (!admissible_collision(pair.perturbed.trace, cfg)) ++violations;
  if (pair.vanilla.trace.off_road() || pair.perturbed.trace.off_road()) ++violations;
  const auto d = pair_components(pair.vanilla.path, pair.perturbed.path, cfg.accel_scale);
  if (d.raw() > cfg.pair_threshold) ++violations;
  return violations;
}

double rigid_constraints(const PairCandidate& pair, const CostConfig& cfg) {
  return cfg.penalty * rigid_violations(pair, cfg);
}

CostBreakdown total_cost(const PairCandidate& pair, const DatasetStats& stats, const CostConfig& cfg) {
  CostBreakdown b;
  b.categorical = 0.5 * (categorical_cost(pair.vanilla.path) + categorical_cost(pair.perturbed.path));
  b.gaussian = 0.5 * (gaussian_cost(pair.vanilla.path, pair.vanilla.trace) +
                      gaussian_cost(pair.perturbed.path, pair.perturbed.trace));
  const auto d = pair_components(pair.vanilla.path, pair.perturbed.path, cfg.accel_scale);
  b.raw_distance = d.raw();
  b.distance = -1.0 / (cfg.pair_epsilon + d.raw());
  b.variance = variance_cost(pair, stats, cfg);
  b.violations = rigid_violations(pair, cfg);
  b.rigid = cfg.penalty * b.violations;
  const auto& w = cfg.weights;
  b.total = w.a1 * b.categorical + w.a2 * b.gaussian + w.a3 * b.distance + w.a4 * b.variance + b.rigid;
  return b;
}

}  // namespace hybridpair
