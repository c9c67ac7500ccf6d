#include "run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace hybridpair::cli {
namespace {

using nlohmann::json;

/// Line of the last key in `path`, found by scanning the raw text for each key in turn.
std::size_t line_of(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    const auto hit = text.find("\"" + key + "\"", pos);
    if (hit == std::string::npos) break;
    pos = hit;
  }
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n'));
}

std::string dotted(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& p : path) out += (out.empty() ? "" : ".") + p;
  return out;
}

class Section {
 public:
  Section(const std::string& text, const json& node, std::vector<std::string> path)
      : text_(text), node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_, "must be an object");
  }

  [[noreturn]] void fail(const std::vector<std::string>& at, const std::string& msg) const {
    throw ConfigError(line_of(text_, at), dotted(at) + ": " + msg);
  }

  std::vector<std::string> at(const std::string& key) const {
    auto p = path_;
    p.push_back(key);
    return p;
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  template <class T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    try {
      out = node_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(at(key), "has the wrong type");
    }
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(text_, node_.contains(key) ? node_.at(key) : empty, at(key));
  }

  const json& node() const { return node_; }

  /// Rejects keys nobody asked for, which catches misspelt fields.
  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) fail(at(key), "unknown field");
    }
  }

  /// Runs a validator and anchors its message at the field it names.
  template <class Fn>
  void check(Fn&& fn) const {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      const std::string first = msg.substr(0, msg.find(' '));
      if (node_.contains(first)) fail(at(first), msg);
      fail(path_, msg);
    }
  }

 private:
  const std::string& text_;
  const json& node_;
  std::vector<std::string> path_;
  std::set<std::string> seen_;
};

void read_agent(Section s, AgentStart& a) {
  s.read("lon", a.cell.lon);
  s.read("column", a.cell.column);
  s.read("speed", a.speed);
  s.finish();
}

void read_init(Section s, InitialDistribution& d) {
  s.read("move_probs", d.move_probs);
  s.read("accel_mean", d.accel_mean);
  s.read("accel_var", d.accel_var);
  s.finish();
  s.check([&] {
    double total = 0.0;
    for (const double p : d.move_probs) {
      if (!(p >= 0.0)) throw std::invalid_argument("move_probs must be >= 0");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("move_probs must sum to 1");
    if (!(d.accel_var > 0.0)) throw std::invalid_argument("accel_var must be positive");
  });
}

void read_scenario(Section s, ScenarioConfig& sc) {
  s.read("lanes", sc.map.lanes);
  s.read("cell_length", sc.map.cell_length);
  s.read("cell_width", sc.map.cell_width);
  s.read("road_cells", sc.map.road_cells);
  s.read("ego_lane", sc.ego_lane);
  s.read("ego_start_x", sc.ego_start_x);
  s.read("ego_cruise_speed", sc.ego_cruise_speed);
  read_agent(s.child("adversary"), sc.adversary);
  read_agent(s.child("independent"), sc.independent);
  read_init(s.child("adversary_init"), sc.adversary_init);
  read_init(s.child("independent_init"), sc.independent_init);
  s.read("timestep", sc.timestep);
  s.read("horizon", sc.horizon);
  s.read("step_duration", sc.step_duration);
  s.read("collision_inflation", sc.collision_inflation);
  s.read("lateral_speed", sc.lateral_speed);
  s.read("vehicle_length", sc.vehicle_length);
  s.read("vehicle_width", sc.vehicle_width);
  s.read("max_speed", sc.max_speed);
  s.read("brake_decel", sc.brake_decel);
  s.read("brake_range_lengths", sc.brake_range_lengths);
  s.read("resume_accel", sc.resume_accel);
  s.finish();
  s.check([&] { sc.validate(); });
}

void read_ce(Section s, CEConfig& ce) {
  s.read("batch_size", ce.batch_size);
  s.read("rho", ce.rho);
  s.read("alpha", ce.alpha);
  s.read("stall_depth", ce.stall_depth);
  s.read("max_iterations", ce.max_iterations);
  s.read("gamma_tolerance", ce.gamma_tolerance);
  s.finish();
  s.check([&] { ce.validate(); });
}

void read_cost(Section s, CostConfig& c) {
  Section w = s.child("weights");
  w.read("a1", c.weights.a1);
  w.read("a2", c.weights.a2);
  w.read("a3", c.weights.a3);
  w.read("a4", c.weights.a4);
  w.finish();
  w.check([&] { c.weights.validate(); });
  s.read("pair_threshold", c.pair_threshold);
  s.read("penalty", c.penalty);
  s.read("pair_epsilon", c.pair_epsilon);
  s.read("variance_epsilon", c.variance_epsilon);
  s.read("accel_scale", c.accel_scale);
  s.read("min_collision_time", c.min_collision_time);
  s.finish();
  s.check([&] { c.validate(); });
}

void read_dataset(Section s, DatasetPlan& d) {
  s.read("pairs", d.pairs);
  s.read("variants_per_pair", d.variants_per_pair);
  s.read("band_low", d.band_low);
  s.read("band_high", d.band_high);
  s.read("variant_budget", d.variant_budget);
  s.read("rudimentary", d.rudimentary);
  s.finish();
  s.check([&] {
    if (d.pairs == 0) throw std::invalid_argument("pairs must be at least 1");
    if (!(d.band_low >= 0.0 && d.band_low <= d.band_high)) {
      throw std::invalid_argument("band_low must lie in [0, band_high]");
    }
  });
}

void read_window(Section s, WindowSpec& w) {
  s.read("X", w.x);
  s.read("Y", w.y);
  s.read("R", w.r);
  s.finish();
  s.check([&] { w.validate(); });
}

void read_forest(Section s, ForestConfig& f) {
  s.read("n_trees", f.n_trees);
  s.read("max_depth", f.max_depth);
  s.read("min_samples_leaf", f.min_samples_leaf);
  json k = nullptr;
  s.read("features_per_split", k);
  if (!k.is_null()) {
    if (!k.is_number_unsigned()) s.fail(s.at("features_per_split"), "has the wrong type");
    f.features_per_split = k.get<std::size_t>();
  }
  s.read("bootstrap", f.bootstrap);
  s.finish();
  s.check([&] { f.validate(); });
}

}  // namespace

ConfigError::ConfigError(std::size_t line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      line_(line) {}

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + upto, '\n'));
    throw ConfigError(line, "malformed JSON");
  }
  RunConfig cfg;
  Section s(text, root, {});
  if (!root.contains("schema_version")) throw ConfigError(1, "schema_version is required");
  s.read("schema_version", cfg.schema_version);
  if (cfg.schema_version != kSchemaVersion) {
    s.fail({"schema_version"}, "unsupported version " + std::to_string(cfg.schema_version));
  }
  if (!root.contains("seed")) throw ConfigError(1, "seed is required");
  s.read("seed", cfg.seed);
  s.read("output_dir", cfg.output_dir);
  read_scenario(s.child("scenario"), cfg.scenario);
  read_ce(s.child("ce"), cfg.ce);
  read_cost(s.child("cost"), cfg.cost);
  read_dataset(s.child("dataset"), cfg.dataset);
  read_window(s.child("window"), cfg.window);
  read_forest(s.child("forest"), cfg.forest);
  s.read("sweep_x", cfg.sweep_x);
  s.finish();
  if (cfg.sweep_x.empty()) s.fail({"sweep_x"}, "needs at least one value");

  cfg.ce.seed = cfg.component_seed("ce");
  cfg.forest.seed = cfg.component_seed("forest");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_run_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(e.line(), path.string() + ":" + std::string(e.what()));
  }
}

nlohmann::json RunConfig::to_json() const {
  const auto agent = [](const AgentStart& a) {
    return json{{"lon", a.cell.lon}, {"column", a.cell.column}, {"speed", a.speed}};
  };
  const auto init = [](const InitialDistribution& d) {
    return json{{"move_probs", d.move_probs}, {"accel_mean", d.accel_mean}, {"accel_var", d.accel_var}};
  };
  const auto& sc = scenario;
  return {
      {"schema_version", schema_version},
      {"seed", seed},
      {"output_dir", output_dir},
      {"scenario",
       {{"lanes", sc.map.lanes},
        {"cell_length", sc.map.cell_length},
        {"cell_width", sc.map.cell_width},
        {"road_cells", sc.map.road_cells},
        {"ego_lane", sc.ego_lane},
        {"ego_start_x", sc.ego_start_x},
        {"ego_cruise_speed", sc.ego_cruise_speed},
        {"adversary", agent(sc.adversary)},
        {"independent", agent(sc.independent)},
        {"adversary_init", init(sc.adversary_init)},
        {"independent_init", init(sc.independent_init)},
        {"timestep", sc.timestep},
        {"horizon", sc.horizon},
        {"step_duration", sc.step_duration},
        {"collision_inflation", sc.collision_inflation},
        {"lateral_speed", sc.lateral_speed},
        {"vehicle_length", sc.vehicle_length},
        {"vehicle_width", sc.vehicle_width},
        {"max_speed", sc.max_speed},
        {"brake_decel", sc.brake_decel},
        {"brake_range_lengths", sc.brake_range_lengths},
        {"resume_accel", sc.resume_accel}}},
      {"ce",
       {{"batch_size", ce.batch_size},
        {"rho", ce.rho},
        {"alpha", ce.alpha},
        {"stall_depth", ce.stall_depth},
        {"max_iterations", ce.max_iterations},
        {"gamma_tolerance", ce.gamma_tolerance}}},
      {"cost",
       {{"weights",
         {{"a1", cost.weights.a1}, {"a2", cost.weights.a2}, {"a3", cost.weights.a3}, {"a4", cost.weights.a4}}},
        {"pair_threshold", cost.pair_threshold},
        {"penalty", cost.penalty},
        {"pair_epsilon", cost.pair_epsilon},
        {"variance_epsilon", cost.variance_epsilon},
        {"accel_scale", cost.accel_scale},
        {"min_collision_time", cost.min_collision_time}}},
      {"dataset",
       {{"pairs", dataset.pairs},
        {"variants_per_pair", dataset.variants_per_pair},
        {"band_low", dataset.band_low},
        {"band_high", dataset.band_high},
        {"variant_budget", dataset.variant_budget},
        {"rudimentary", dataset.rudimentary}}},
      {"window", {{"X", window.x}, {"Y", window.y}, {"R", window.r}}},
      {"forest",
       {{"n_trees", forest.n_trees},
        {"max_depth", forest.max_depth},
        {"min_samples_leaf", forest.min_samples_leaf},
        {"features_per_split",
         forest.features_per_split ? json(*forest.features_per_split) : json(nullptr)},
        {"bootstrap", forest.bootstrap}}},
      {"sweep_x", sweep_x}};
}

}  // namespace hybridpair::cli
