#pragma once

#include <filesystem>
#include <string>

#include "run_config.hpp"

namespace fixtures {

inline std::filesystem::path source_dir() { return HYBRIDPAIR_SOURCE_DIR; }

inline std::filesystem::path reference_config_path() {
  return source_dir() / "configs" / "reference.json";
}

inline hybridpair::cli::RunConfig reference_config() {
  return hybridpair::cli::load_run_config(reference_config_path());
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hybridpair-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
