#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridpair/mlcp.hpp"

namespace hybridpair::cli {

inline constexpr int kSchemaVersion = 1;

struct DatasetPlan {
  std::size_t pairs = 100;
  std::size_t variants_per_pair = 3;
  double band_low = 2.0;
  double band_high = 6.0;
  std::size_t variant_budget = 500;
  std::size_t rudimentary = 400;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  ScenarioConfig scenario;
  CEConfig ce;
  CostConfig cost;
  DatasetPlan dataset;
  WindowSpec window;
  ForestConfig forest;
  std::vector<double> sweep_x{1, 2, 3, 4, 5};

  /// Sub-seed for one pipeline component.
  std::uint64_t component_seed(std::string_view component) const {
    return derive_seed(seed, component, 0);
  }
  MatrixOptions matrix_options() const { return {std::nullopt, scenario.horizon}; }
  nlohmann::json to_json() const;
};

/// Parse or validation failure; `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace hybridpair::cli
