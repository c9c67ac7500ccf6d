#pragma once

#include "run_config.hpp"

namespace hybridpair::cli {

struct GenerateOutcome {
  Archive archive;
  CoreReport core;
  VariantReport variants;
  RudimentaryReport rudimentary;
};

/// Core pairs, variants and rudimentary paths as configured, all seeded from cfg.seed.
GenerateOutcome generate_archive(const RunConfig& cfg);

}  // namespace hybridpair::cli
