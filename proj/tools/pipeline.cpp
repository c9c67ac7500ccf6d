#include "pipeline.hpp"

namespace hybridpair::cli {

GenerateOutcome generate_archive(const RunConfig& cfg) {
  GenerateOutcome out;
  out.core = generate_core(out.archive, cfg.dataset.pairs, cfg.ce, cfg.scenario, cfg.cost);
  if (cfg.dataset.variants_per_pair > 0 && !out.archive.pairs().empty()) {
    out.variants = generate_variants(out.archive, cfg.scenario, cfg.cost,
                                     {cfg.dataset.variants_per_pair, cfg.dataset.band_low,
                                      cfg.dataset.band_high, cfg.dataset.variant_budget,
                                      cfg.component_seed("variants")});
  }
  out.rudimentary = generate_rudimentary(out.archive, cfg.dataset.rudimentary, cfg.scenario,
                                         cfg.scenario.adversary_params(),
                                         cfg.scenario.independent_params(),
                                         cfg.component_seed("rudimentary"));
  return out;
}

}  // namespace hybridpair::cli
