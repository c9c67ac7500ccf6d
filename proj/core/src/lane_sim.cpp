#include "hybridpair/lane_sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hybridpair {
namespace {

struct PathKinematics {
  std::vector<int> columns;  // column at each step boundary, size steps + 1
  std::optional<std::size_t> off_road_step;
};

PathKinematics plan_columns(const GridMap& map, int start_column, const HybridPath& path) {
  PathKinematics k;
  k.columns.push_back(start_column);
  for (std::size_t s = 0; s < path.horizon(); ++s) {
    const int next = k.columns.back() + move_delta(path.moves[s]).lat;
    if (!k.off_road_step && (next < 0 || next >= map.columns())) k.off_road_step = s;
    k.columns.push_back(next);
  }
  return k;
}

/// Integrates one path-following vehicle.
class PathFollower {
 public:
  PathFollower(const ScenarioConfig& cfg, const AgentStart& start, const HybridPath& path)
      : cfg_(cfg), path_(path), plan_(plan_columns(cfg.map, start.cell.column, path)) {
    state_.x = cfg.map.cell_center_x(start.cell.lon);
    state_.y = cfg.map.column_center_y(start.cell.column);
    state_.length = cfg.vehicle_length;
    state_.width = cfg.vehicle_width;
    speed_ = std::clamp(start.speed, 0.0, cfg.max_speed);
    update_velocity(0.0);
    state_.heading = heading_of(state_.velocity, 0.0);
    state_.acceleration = {path.horizon() > 0 ? path.accels[0] : 0.0, 0.0, 0.0};
  }

  const VehicleState& state() const { return state_; }

  /// Step index in effect during (t, t + dt].
  std::size_t step_at(double t) const {
    const auto s = static_cast<std::size_t>(std::floor(t / cfg_.step_duration + 1e-9));
    return std::min(s, path_.horizon() - 1);
  }

  /// True when the path leaves the road before time t.
  bool off_road_by(double t) const {
    return plan_.off_road_step &&
           t >= static_cast<double>(*plan_.off_road_step) * cfg_.step_duration - 1e-9;
  }

  void advance(double t_from, double dt) {
    const std::size_t s = step_at(t_from);
    const Vec3 old_velocity = state_.velocity;
    const double old_heading = state_.heading;

    speed_ = std::clamp(speed_ + path_.accels[s] * dt, 0.0, cfg_.max_speed);
    const double t_to = t_from + dt;
    update_velocity(t_to - 1e-12);
    if (cfg_.lateral_speed > 0.0) {
      const double target = cfg_.map.column_center_y(plan_.columns[s + 1]);
      const double vy =
          std::clamp((target - state_.y) / dt, -cfg_.lateral_speed, cfg_.lateral_speed);
      state_.velocity.y = vy;
      state_.y += vy * dt;
    } else {
      state_.y = lateral_at(t_to);
    }
    state_.x += state_.velocity.x * dt;

    state_.heading = heading_of(state_.velocity, old_heading);
    state_.acceleration = {(state_.velocity.x - old_velocity.x) / dt,
                           (state_.velocity.y - old_velocity.y) / dt, 0.0};
    state_.angular_velocity = {0.0, 0.0, wrap_angle(state_.heading - old_heading) / dt};
  }

 private:
  static double heading_of(const Vec3& v, double fallback) {
    if (std::hypot(v.x, v.y) < 1e-9) return fallback;
    return std::atan2(v.y, v.x);
  }

  double lateral_at(double t) const {
    const double u = t / cfg_.step_duration;
    auto s = static_cast<std::size_t>(std::floor(u + 1e-9));
    if (s >= path_.horizon()) return cfg_.map.column_center_y(plan_.columns.back());
    const double frac = std::clamp(u - static_cast<double>(s), 0.0, 1.0);
    const double y0 = cfg_.map.column_center_y(plan_.columns[s]);
    const double y1 = cfg_.map.column_center_y(plan_.columns[s + 1]);
    return y0 + (y1 - y0) * frac;
  }

  void update_velocity(double t) {
    const std::size_t s = step_at(std::max(t, 0.0));
    const GridDelta d = move_delta(path_.moves[s]);
    const double surge = d.lon * cfg_.map.cell_length / cfg_.step_duration;
    const double lateral = d.lat * cfg_.map.cell_width / cfg_.step_duration;
    state_.velocity = {speed_ + surge, lateral, 0.0};
  }

  const ScenarioConfig& cfg_;
  const HybridPath& path_;
  PathKinematics plan_;
  VehicleState state_;
  double speed_ = 0.0;
};

bool laterally_overlapping(const VehicleState& a, const VehicleState& b) {
  return std::abs(a.y - b.y) < 0.5 * (a.width + b.width);
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("malformed number in trace file: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

void GridMap::validate() const {
  if (lanes < 2) throw std::invalid_argument("map needs at least 2 lanes");
  if (!(cell_length > 0.0) || !(cell_width > 0.0)) {
    throw std::invalid_argument("cell dimensions must be positive");
  }
  if (road_cells <= 0) throw std::invalid_argument("road length must be positive");
}

std::size_t ScenarioConfig::path_steps() const {
  return static_cast<std::size_t>(std::llround(horizon / step_duration));
}

std::size_t ScenarioConfig::sample_count() const {
  return static_cast<std::size_t>(std::llround(horizon / timestep)) + 1;
}

void ScenarioConfig::validate() const {
  map.validate();
  if (std::abs(timestep - 0.05) > 1e-12 && std::abs(timestep - 0.1) > 1e-12) {
    throw std::invalid_argument("timestep must be 0.05 or 0.1 s");
  }
  if (!(step_duration > 0.0)) throw std::invalid_argument("step_duration must be positive");
  const double steps = horizon / step_duration;
  if (!(horizon > 0.0) || std::abs(steps - std::round(steps)) > 1e-9) {
    throw std::invalid_argument("horizon must be a positive multiple of step_duration");
  }
  const double per_step = step_duration / timestep;
  if (std::abs(per_step - std::round(per_step)) > 1e-9) {
    throw std::invalid_argument("step_duration must be a multiple of timestep");
  }
  if (ego_lane < 0 || ego_lane >= map.lanes) throw std::invalid_argument("ego lane off the map");
  for (const auto* a : {&adversary, &independent}) {
    if (a->cell.column < 0 || a->cell.column >= map.columns() || a->cell.lon < 0 ||
        a->cell.lon >= map.road_cells) {
      throw std::invalid_argument("start cell off the map");
    }
  }
  if (!(vehicle_length > 0.0) || !(vehicle_width > 0.0)) {
    throw std::invalid_argument("vehicle dimensions must be positive");
  }
  if (collision_inflation < 0.0) throw std::invalid_argument("collision_inflation must be >= 0");
  if (!(max_speed > 0.0)) throw std::invalid_argument("max_speed must be positive");
  if (!(lateral_speed >= 0.0)) throw std::invalid_argument("lateral_speed must be >= 0");
}

namespace {

HybridParams params_from_init(std::size_t horizon, const InitialDistribution& init) {
  return HybridParams::stationary(
      horizon, CategoricalStep(std::vector<double>(init.move_probs.begin(), init.move_probs.end())),
      {init.accel_mean, init.accel_var});
}

}  // namespace

HybridParams ScenarioConfig::adversary_params() const {
  return params_from_init(path_steps(), adversary_init);
}

HybridParams ScenarioConfig::independent_params() const {
  return params_from_init(path_steps(), independent_init);
}

std::string_view outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::completed: return "completed";
    case Outcome::collision: return "collision";
    case Outcome::off_road: return "off-road";
  }
  return "completed";
}

Outcome outcome_from_name(std::string_view name) {
  if (name == "completed") return Outcome::completed;
  if (name == "collision") return Outcome::collision;
  if (name == "off-road") return Outcome::off_road;
  throw std::invalid_argument("unknown outcome '" + std::string(name) + "'");
}

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

bool detect_collision(const VehicleState& a, const VehicleState& b, double inflation) {
  struct Box {
    double cx, cy, ux, uy, vx, vy, hl, hw;
  };
  auto make = [inflation](const VehicleState& s) {
    const double c = std::cos(s.heading);
    const double n = std::sin(s.heading);
    return Box{s.x, s.y, c, n, -n, c, 0.5 * s.length + inflation, 0.5 * s.width + inflation};
  };
  const Box A = make(a);
  const Box B = make(b);
  const double dx = B.cx - A.cx;
  const double dy = B.cy - A.cy;

  auto radius = [](const Box& box, double ax, double ay) {
    return box.hl * std::abs(box.ux * ax + box.uy * ay) +
           box.hw * std::abs(box.vx * ax + box.vy * ay);
  };
  const std::array<std::array<double, 2>, 4> axes{
      {{A.ux, A.uy}, {A.vx, A.vy}, {B.ux, B.uy}, {B.vx, B.vy}}};
  for (const auto& axis : axes) {
    const double dist = std::abs(dx * axis[0] + dy * axis[1]);
    if (dist > radius(A, axis[0], axis[1]) + radius(B, axis[0], axis[1])) return false;
  }
  return true;
}

RelativeGeometry relative_geometry(const VehicleState& a, const VehicleState& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double distance = std::hypot(dx, dy);
  const double angle = distance > 0.0 ? wrap_angle(std::atan2(dy, dx) - a.heading) : 0.0;
  return {distance, angle};
}

SimTrace run_scenario(const ScenarioConfig& cfg, const HybridPath& adv_path,
                      const HybridPath& ind_path) {
  cfg.validate();
  const std::size_t steps = cfg.path_steps();
  if (adv_path.horizon() != steps || ind_path.horizon() != steps ||
      adv_path.accels.size() != steps || ind_path.accels.size() != steps) {
    throw std::invalid_argument("path horizon does not match the scenario");
  }

  SimTrace trace;
  trace.timestep = cfg.timestep;
  trace.step_duration = cfg.step_duration;
  trace.adv_initial_speed = cfg.adversary.speed;
  trace.max_speed = cfg.max_speed;

  VehicleState ego;
  ego.x = cfg.ego_start_x;
  ego.y = cfg.map.lane_center_y(cfg.ego_lane);
  ego.velocity = {cfg.ego_cruise_speed, 0.0, 0.0};
  ego.length = cfg.vehicle_length;
  ego.width = cfg.vehicle_width;
  double ego_speed = cfg.ego_cruise_speed;

  PathFollower adv(cfg, cfg.adversary, adv_path);
  PathFollower ind(cfg, cfg.independent, ind_path);

  const std::size_t n = cfg.sample_count();
  trace.samples.reserve(n);
  trace.min_distance = std::numeric_limits<double>::infinity();

  auto record = [&](double t) {
    trace.samples.push_back({t, ego, adv.state(), ind.state()});
    trace.min_distance =
        std::min(trace.min_distance, relative_geometry(ego, adv.state()).distance);
  };

  auto on_road = [&](const VehicleState& s) { return s.x >= 0.0 && s.x <= cfg.map.road_length(); };

  record(0.0);
  if (detect_collision(ego, adv.state(), cfg.collision_inflation)) {
    trace.collision = true;
    trace.t_collision = 0.0;
    trace.outcome = Outcome::collision;
    return trace;
  }
  if (adv.off_road_by(0.0) || ind.off_road_by(0.0)) {
    trace.outcome = Outcome::off_road;
    return trace;
  }

  const double brake_range = cfg.brake_range_lengths * cfg.vehicle_length;
  for (std::size_t k = 1; k < n; ++k) {
    const double t_prev = static_cast<double>(k - 1) * cfg.timestep;
    const double t = static_cast<double>(k) * cfg.timestep;

    bool obstacle_ahead = false;
    for (const VehicleState* other : {&adv.state(), &ind.state()}) {
      const double gap = other->x - ego.x;
      if (gap > 0.0 && gap <= brake_range && laterally_overlapping(ego, *other)) {
        obstacle_ahead = true;
      }
    }
    double ego_accel = 0.0;
    if (obstacle_ahead) {
      ego_accel = -cfg.brake_decel;
    } else if (ego_speed < cfg.ego_cruise_speed) {
      ego_accel = cfg.resume_accel;
    }
    const double old_speed = ego_speed;
    ego_speed = std::clamp(ego_speed + ego_accel * cfg.timestep, 0.0,
                           obstacle_ahead ? cfg.max_speed : cfg.ego_cruise_speed);
    ego.x += ego_speed * cfg.timestep;
    ego.velocity = {ego_speed, 0.0, 0.0};
    ego.acceleration = {(ego_speed - old_speed) / cfg.timestep, 0.0, 0.0};

    adv.advance(t_prev, cfg.timestep);
    ind.advance(t_prev, cfg.timestep);
    record(t);

    if (detect_collision(ego, adv.state(), cfg.collision_inflation)) {
      trace.collision = true;
      trace.t_collision = t;
      trace.outcome = Outcome::collision;
      return trace;
    }
    if (adv.off_road_by(t) || ind.off_road_by(t) || !on_road(adv.state()) ||
        !on_road(ind.state()) || !on_road(ego)) {
      trace.outcome = Outcome::off_road;
      return trace;
    }
  }
  return trace;
}

HybridPath scripted_encroachment(std::size_t horizon, std::size_t step, double accel) {
  HybridPath path = constant_path(horizon, Move::stay, accel);
  if (step < horizon) path.moves[step] = static_cast<std::uint8_t>(Move::right);
  return path;
}

HybridPath constant_path(std::size_t horizon, Move move, double accel) {
  return {std::vector<std::uint8_t>(horizon, static_cast<std::uint8_t>(move)),
          std::vector<double>(horizon, accel)};
}

const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> kColumns = [] {
    std::vector<std::string> cols;
    for (const std::string prefix : {"ego", "adv", "ind_adv"}) {
      for (const std::string field :
           {"x", "y", "vel_x", "vel_y", "vel_z", "accel_x", "accel_y", "accel_z", "ang_vel_x",
            "ang_vel_y", "ang_vel_z", "heading", "length", "width"}) {
        cols.push_back(prefix + "_" + field);
      }
    }
    return cols;
  }();
  return kColumns;
}

void write_trace_csv(std::ostream& out, const SimTrace& trace) {
  out << "#outcome=" << outcome_name(trace.outcome) << '\n';
  out << "#collision=" << (trace.collision ? 1 : 0) << '\n';
  out << "#t_collision=" << (trace.t_collision ? format_double(*trace.t_collision) : "") << '\n';
  out << "#min_distance=" << format_double(trace.min_distance) << '\n';
  out << "#timestep=" << format_double(trace.timestep) << '\n';
  out << "#step_duration=" << format_double(trace.step_duration) << '\n';
  out << "#adv_initial_speed=" << format_double(trace.adv_initial_speed) << '\n';
  out << "#max_speed=" << format_double(trace.max_speed) << '\n';
  out << 't';
  for (const auto& c : trace_columns()) out << ',' << c;
  out << '\n';
  for (const auto& s : trace.samples) {
    out << format_double(s.t);
    for (const VehicleState* v : {&s.ego, &s.adv, &s.ind}) {
      for (const double f :
           {v->x, v->y, v->velocity.x, v->velocity.y, v->velocity.z, v->acceleration.x,
            v->acceleration.y, v->acceleration.z, v->angular_velocity.x, v->angular_velocity.y,
            v->angular_velocity.z, v->heading, v->length, v->width}) {
        out << ',' << format_double(f);
      }
    }
    out << '\n';
  }
}

SimTrace read_trace_csv(std::istream& in) {
  SimTrace trace;
  std::string line;
  bool header_seen = false;
  const std::size_t expected = trace_columns().size() + 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(1, eq - 1);
      const std::string value = line.substr(eq + 1);
      if (key == "outcome") trace.outcome = outcome_from_name(value);
      else if (key == "collision") trace.collision = value == "1";
      else if (key == "t_collision" && !value.empty()) trace.t_collision = parse_double(value);
      else if (key == "min_distance") trace.min_distance = parse_double(value);
      else if (key == "timestep") trace.timestep = parse_double(value);
      else if (key == "step_duration") trace.step_duration = parse_double(value);
      else if (key == "adv_initial_speed") trace.adv_initial_speed = parse_double(value);
      else if (key == "max_speed") trace.max_speed = parse_double(value);
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<double> f;
    f.reserve(expected);
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(parse_double(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != expected) throw std::runtime_error("trace row has wrong column count");
    TraceSample s;
    s.t = f[0];
    std::size_t i = 1;
    for (VehicleState* v : {&s.ego, &s.adv, &s.ind}) {
      v->x = f[i++];
      v->y = f[i++];
      v->velocity = {f[i], f[i + 1], f[i + 2]};
      i += 3;
      v->acceleration = {f[i], f[i + 1], f[i + 2]};
      i += 3;
      v->angular_velocity = {f[i], f[i + 1], f[i + 2]};
      i += 3;
      v->heading = f[i++];
      v->length = f[i++];
      v->width = f[i++];
    }
    trace.samples.push_back(s);
  }
  if (trace.collision != trace.t_collision.has_value()) {
    throw std::runtime_error("trace collision flag and t_collision disagree");
  }
  return trace;
}

}  // namespace hybridpair
