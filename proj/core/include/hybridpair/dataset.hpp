#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridpair/ce_engine.hpp"
#include "hybridpair/cost_model.hpp"

namespace hybridpair {

enum class PathKind { vanilla, perturbed, variant_vanilla, variant_perturbed, rudimentary };

inline constexpr std::array<PathKind, 5> kAllKinds{PathKind::vanilla, PathKind::perturbed,
                                                   PathKind::variant_vanilla,
                                                   PathKind::variant_perturbed,
                                                   PathKind::rudimentary};

std::string_view kind_name(PathKind kind);
PathKind kind_from_name(std::string_view name);

/// 1 for the collision kinds, 0 otherwise.
int label_for(PathKind kind);

struct Provenance {
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
  std::string params_digest;
};

struct PathRecord {
  std::size_t id = 0;
  PathKind kind = PathKind::vanilla;
  int label = 0;
  HybridPath path;
  HybridPath independent;
  SimTrace trace;
  std::optional<std::size_t> pair_id;
  Provenance provenance;
};

/// A core vanilla/perturbed pair and the distributions that produced it.
struct PairInfo {
  std::size_t pair_id = 0;
  std::size_t vanilla_id = 0;
  std::size_t perturbed_id = 0;
  double t_collision = 0.0;
  std::uint64_t seed = 0;
  ParamsTrio params;
  HybridPath independent;
  std::vector<IterationReport> history;
};

/// Running mean/variance of one path scalar.
class MomentAccumulator {
 public:
  void add(double x);
  std::size_t count() const { return n_; }
  /// Mean and sample standard deviation once two values are present.
  std::optional<ShellStats> shell() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Labelled path archive. Label, kind and outcome consistency is enforced on insert,
/// and the class statistics used by the variance cost are maintained incrementally
/// from the core vanilla and perturbed records.
class Archive {
 public:
  /// Validates and appends; the record id is reassigned to the next free id.
  std::size_t add(PathRecord record);

  /// Appends the two records of a search result and registers the pair.
  /// `converged` is stored for later variant sampling.
  std::size_t add_pair(const PairSearchResult& result, const ParamsTrio& converged);

  const std::vector<PathRecord>& records() const { return records_; }
  const std::vector<PairInfo>& pairs() const { return pairs_; }
  const PathRecord& record(std::size_t id) const { return records_.at(id); }
  const PairInfo& pair(std::size_t pair_id) const { return pairs_.at(pair_id); }
  std::size_t count(PathKind kind) const;

  const DatasetStats& stats() const { return stats_; }
  DatasetStats recompute_stats() const;

  /// t_collision of the record's core pair, when it belongs to one.
  std::optional<double> pair_collision_time(const PathRecord& record) const;

  /// Serialised record and pair lines, in id order.
  std::string records_jsonl() const;
  std::string pairs_jsonl() const;
  std::string digest() const;

  /// Writes archive.jsonl, pairs.jsonl and content-addressed traces/<sha>.csv.
  void save(const std::filesystem::path& dir) const;
  static Archive load(const std::filesystem::path& dir);

 private:
  void refresh_stats();
  nlohmann::json record_json(const PathRecord& r, bool with_trace_file) const;

  std::vector<PathRecord> records_;
  std::vector<PairInfo> pairs_;
  std::array<MomentAccumulator, 4> moments_{};
  DatasetStats stats_;
};

/// Throws std::invalid_argument when a record's label, kind and trace disagree.
void check_record(const PathRecord& record);

struct CoreReport {
  std::size_t requested = 0;
  std::size_t added = 0;
  std::size_t exhausted = 0;
  std::vector<std::size_t> iterations;  // per successful search
};

/// Runs `count` HybridPair searches. Search i is seeded from (cfg.seed, i), and
/// the archive statistics are refreshed after every pair so the variance term
/// steers the next search. Exhausted searches are skipped with a warning.
CoreReport generate_core(Archive& archive, std::size_t count, const CEConfig& cfg,
                         const ScenarioConfig& scenario, const CostConfig& cost);

struct VariantConfig {
  std::size_t per_pair = 2;  // variants of each kind per core pair
  double band_low = 2.0;
  double band_high = 6.0;
  std::size_t budget = 500;  // draws per pair and kind
  std::uint64_t seed = 0;
};

struct VariantReport {
  std::size_t added = 0;
  std::size_t shortfall = 0;
};

/// Resamples each pair's converged distributions and keeps draws whose raw
/// distance to the core counterpart lies in [band_low, band_high) and whose
/// outcome matches the label.
VariantReport generate_variants(Archive& archive, const ScenarioConfig& scenario,
                                const CostConfig& cost, const VariantConfig& cfg);

struct RudimentaryReport {
  std::size_t added = 0;
  std::size_t draws = 0;
};

/// Draws un-optimised paths from `base` and keeps the collision-free, on-road ones.
RudimentaryReport generate_rudimentary(Archive& archive, std::size_t count,
                                       const ScenarioConfig& scenario, const HybridParams& base,
                                       const HybridParams& independent_base, std::uint64_t seed);

/// Deterministic selection of records by kind.
struct Dataset {
  std::vector<std::size_t> record_ids;  // ascending
  std::size_t zeros = 0;
  std::size_t ones = 0;
  std::string digest;
  std::vector<std::string> warnings;

  double imbalance() const { return ones == 0 ? 0.0 : static_cast<double>(zeros) / ones; }
};

/// Takes the first `mix[kind]` records of each kind in id order.
Dataset compose_dataset(const Archive& archive, const std::map<PathKind, std::size_t>& mix);

/// Every record in the archive.
Dataset compose_dataset(const Archive& archive);

}  // namespace hybridpair
