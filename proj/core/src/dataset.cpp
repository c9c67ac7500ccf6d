#include "hybridpair/dataset.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hybridpair/digest.hpp"

namespace hybridpair {
namespace {

std::string trace_text(const SimTrace& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::string_view kind_name(PathKind kind) {
  switch (kind) {
    case PathKind::vanilla: return "vanilla";
    case PathKind::perturbed: return "perturbed";
    case PathKind::variant_vanilla: return "variant-vanilla";
    case PathKind::variant_perturbed: return "variant-perturbed";
    case PathKind::rudimentary: return "rudimentary";
  }
  return "vanilla";
}

PathKind kind_from_name(std::string_view name) {
  for (const auto k : kAllKinds) {
    if (kind_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown path kind '" + std::string(name) + "'");
}

int label_for(PathKind kind) {
  return kind == PathKind::perturbed || kind == PathKind::variant_perturbed ? 1 : 0;
}

void MomentAccumulator::add(double x) {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

std::optional<ShellStats> MomentAccumulator::shell() const {
  if (n_ < 2) return std::nullopt;
  return ShellStats{mean_, std::sqrt(std::max(0.0, m2_ / static_cast<double>(n_ - 1)))};
}

void check_record(const PathRecord& r) {
  if (r.label != label_for(r.kind)) {
    throw std::invalid_argument("record label does not match kind " + std::string(kind_name(r.kind)));
  }
  if (r.trace.off_road()) throw std::invalid_argument("off-road trace cannot be archived");
  if (r.label == 1 && !r.trace.collision) {
    throw std::invalid_argument(std::string(kind_name(r.kind)) + " record without a collision");
  }
  if (r.label == 0 && r.trace.collision) {
    throw std::invalid_argument(std::string(kind_name(r.kind)) + " record with a collision");
  }
  if (r.trace.collision && !r.trace.t_collision) {
    throw std::invalid_argument("collision trace missing t_collision");
  }
}

std::size_t Archive::add(PathRecord record) {
  check_record(record);
  if (record.pair_id && *record.pair_id >= pairs_.size()) {
    throw std::invalid_argument("record refers to an unknown pair");
  }
  record.id = records_.size();
  const PathKind kind = record.kind;
  const auto chi = path_scalars(record.path);
  records_.push_back(std::move(record));
  if (kind == PathKind::vanilla || kind == PathKind::perturbed) {
    const auto c = kind == PathKind::vanilla ? PathClass::vanilla : PathClass::perturbed;
    moments_[DatasetStats::index(c, PathScalar::location)].add(chi.chi_location);
    moments_[DatasetStats::index(c, PathScalar::acceleration)].add(chi.chi_acceleration);
    refresh_stats();
  }
  return records_.back().id;
}

std::size_t Archive::add_pair(const PairSearchResult& result, const ParamsTrio& converged) {
  const std::size_t pair_id = pairs_.size();
  PairInfo info{pair_id, 0, 0, result.pair.perturbed.trace.t_collision.value_or(0.0),
                result.seed, converged, result.independent, result.state.history};
  if (!result.pair.perturbed.trace.t_collision) {
    throw std::invalid_argument("perturbed record without a collision");
  }
  // The pair is registered first so its records can point at it; roll back on failure.
  pairs_.push_back(info);
  try {
    PathRecord v{0, PathKind::vanilla, 0, result.pair.vanilla.path, result.independent,
                 result.pair.vanilla.trace, pair_id,
                 {result.seed, result.iteration, converged.vanilla.digest()}};
    PathRecord p{0, PathKind::perturbed, 1, result.pair.perturbed.path, result.independent,
                 result.pair.perturbed.trace, pair_id,
                 {result.seed, result.iteration, converged.perturbed.digest()}};
    check_record(v);
    check_record(p);
    pairs_.back().vanilla_id = add(std::move(v));
    pairs_.back().perturbed_id = add(std::move(p));
  } catch (...) {
    pairs_.pop_back();
    throw;
  }
  return pair_id;
}

std::size_t Archive::count(PathKind kind) const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(),
                                                [kind](const PathRecord& r) { return r.kind == kind; }));
}

void Archive::refresh_stats() {
  for (std::size_t i = 0; i < moments_.size(); ++i) stats_.entries[i] = moments_[i].shell();
}

DatasetStats Archive::recompute_stats() const {
  DatasetStats out;
  for (const PathClass c : {PathClass::vanilla, PathClass::perturbed}) {
    const PathKind kind = c == PathClass::vanilla ? PathKind::vanilla : PathKind::perturbed;
    std::vector<double> loc, acc;
    for (const auto& r : records_) {
      if (r.kind != kind) continue;
      const auto chi = path_scalars(r.path);
      loc.push_back(chi.chi_location);
      acc.push_back(chi.chi_acceleration);
    }
    for (const PathScalar s : {PathScalar::location, PathScalar::acceleration}) {
      const auto& xs = s == PathScalar::location ? loc : acc;
      if (xs.size() < 2) continue;
      const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
      double ss = 0.0;
      for (const double x : xs) ss += (x - mean) * (x - mean);
      out.at(c, s) = ShellStats{mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
    }
  }
  return out;
}

std::optional<double> Archive::pair_collision_time(const PathRecord& record) const {
  if (!record.pair_id) return std::nullopt;
  return pairs_.at(*record.pair_id).t_collision;
}

nlohmann::json Archive::record_json(const PathRecord& r, bool with_trace_file) const {
  nlohmann::json j{{"id", r.id},
                   {"kind", kind_name(r.kind)},
                   {"label", r.label},
                   {"pair_id", r.pair_id ? nlohmann::json(*r.pair_id) : nlohmann::json(nullptr)},
                   {"seed", r.provenance.seed},
                   {"iteration", r.provenance.iteration},
                   {"params_digest", r.provenance.params_digest},
                   {"collision", r.trace.collision},
                   {"t_collision", r.trace.t_collision ? nlohmann::json(*r.trace.t_collision)
                                                       : nlohmann::json(nullptr)},
                   {"path", to_json(r.path)},
                   {"independent", to_json(r.independent)}};
  if (with_trace_file) j["trace_file"] = "traces/" + sha256_hex(trace_text(r.trace)) + ".csv";
  return j;
}

std::string Archive::records_jsonl() const {
  std::string out;
  for (const auto& r : records_) out += record_json(r, true).dump() + "\n";
  return out;
}

std::string Archive::pairs_jsonl() const {
  std::string out;
  for (const auto& p : pairs_) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : p.history) history.push_back(to_json(h));
    nlohmann::json j{{"pair_id", p.pair_id},
                     {"vanilla_id", p.vanilla_id},
                     {"perturbed_id", p.perturbed_id},
                     {"t_collision", p.t_collision},
                     {"seed", p.seed},
                     {"params",
                      {{"vanilla", to_json(p.params.vanilla)},
                       {"perturbed", to_json(p.params.perturbed)},
                       {"independent", to_json(p.params.independent)}}},
                     {"independent", to_json(p.independent)},
                     {"history", std::move(history)}};
    out += j.dump() + "\n";
  }
  return out;
}

std::string Archive::digest() const { return sha256_hex(records_jsonl() + pairs_jsonl()); }

void Archive::save(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "traces");
  for (const auto& r : records_) {
    const std::string text = trace_text(r.trace);
    const fs::path file = dir / "traces" / (sha256_hex(text) + ".csv");
    if (!fs::exists(file)) {
      std::ofstream(file, std::ios::binary) << text;
    }
  }
  std::ofstream(dir / "archive.jsonl", std::ios::binary) << records_jsonl();
  std::ofstream(dir / "pairs.jsonl", std::ios::binary) << pairs_jsonl();
}

Archive Archive::load(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir / "archive.jsonl")) {
    throw std::runtime_error("no archive at " + dir.string());
  }
  Archive archive;
  const auto pair_lines =
      fs::exists(dir / "pairs.jsonl") ? read_lines(dir / "pairs.jsonl") : std::vector<std::string>{};
  std::vector<PairInfo> pairs;
  for (const auto& line : pair_lines) {
    const auto j = nlohmann::json::parse(line);
    PairInfo p{j.at("pair_id").get<std::size_t>(),
               j.at("vanilla_id").get<std::size_t>(),
               j.at("perturbed_id").get<std::size_t>(),
               j.at("t_collision").get<double>(),
               j.at("seed").get<std::uint64_t>(),
               ParamsTrio{params_from_json(j.at("params").at("vanilla")),
                          params_from_json(j.at("params").at("perturbed")),
                          params_from_json(j.at("params").at("independent"))},
               path_from_json(j.at("independent")),
               {}};
    for (const auto& h : j.at("history")) {
      p.history.push_back({h.at("iteration").get<std::size_t>(), h.at("gamma").get<double>(),
                           h.at("best_score").get<double>(), h.at("elite_size").get<std::size_t>(),
                           h.at("params_digest").get<std::string>()});
    }
    if (p.pair_id != pairs.size()) throw std::runtime_error("pairs.jsonl is out of order");
    pairs.push_back(std::move(p));
  }
  archive.pairs_ = std::move(pairs);

  for (const auto& line : read_lines(dir / "archive.jsonl")) {
    const auto j = nlohmann::json::parse(line);
    const auto trace_file = j.at("trace_file").get<std::string>();
    std::ifstream tin(dir / trace_file, std::ios::binary);
    if (!tin) throw std::runtime_error("missing trace file " + trace_file);
    std::ostringstream buf;
    buf << tin.rdbuf();
    const std::string text = buf.str();
    if ("traces/" + sha256_hex(text) + ".csv" != trace_file) {
      throw std::runtime_error("trace file " + trace_file + " does not match its digest");
    }
    std::istringstream tstream(text);
    PathRecord r;
    r.kind = kind_from_name(j.at("kind").get<std::string>());
    r.label = j.at("label").get<int>();
    r.path = path_from_json(j.at("path"));
    r.independent = path_from_json(j.at("independent"));
    r.trace = read_trace_csv(tstream);
    if (!j.at("pair_id").is_null()) r.pair_id = j.at("pair_id").get<std::size_t>();
    r.provenance = {j.at("seed").get<std::uint64_t>(), j.at("iteration").get<std::size_t>(),
                    j.at("params_digest").get<std::string>()};
    const auto id = archive.add(std::move(r));
    if (id != j.at("id").get<std::size_t>()) throw std::runtime_error("archive.jsonl is out of order");
  }
  return archive;
}

CoreReport generate_core(Archive& archive, std::size_t count, const CEConfig& cfg,
                         const ScenarioConfig& scenario, const CostConfig& cost) {
  if (count == 0) throw std::invalid_argument("core pair count must be at least 1");
  CoreReport report;
  report.requested = count;
  for (std::size_t i = 0; i < count; ++i) {
    CEConfig search = cfg;
    search.seed = derive_seed(cfg.seed, "core-search", i);
    try {
      const auto result = hybrid_pair_search(search, scenario, cost, archive.stats());
      archive.add_pair(result, result.state.terminal_batch);
      ++report.added;
      report.iterations.push_back(result.iteration);
    } catch (const SearchExhausted& e) {
      ++report.exhausted;
      spdlog::warn("core search {} exhausted after {} iterations", i, e.state().history.size());
    }
  }
  if (report.added < count) {
    spdlog::warn("generated {} of {} requested core pairs", report.added, count);
  }
  return report;
}

VariantReport generate_variants(Archive& archive, const ScenarioConfig& scenario,
                                const CostConfig& cost, const VariantConfig& cfg) {
  if (archive.pairs().empty()) throw std::invalid_argument("archive has no core pairs");
  VariantReport report;
  const std::size_t pair_count = archive.pairs().size();
  for (std::size_t pid = 0; pid < pair_count; ++pid) {
    for (const PathKind kind : {PathKind::variant_vanilla, PathKind::variant_perturbed}) {
      const PairInfo& info = archive.pair(pid);
      const bool perturbed = kind == PathKind::variant_perturbed;
      const HybridParams params = perturbed ? info.params.perturbed : info.params.vanilla;
      const HybridPath core = archive.record(perturbed ? info.perturbed_id : info.vanilla_id).path;
      const HybridPath independent = info.independent;
      const std::string params_digest = params.digest();
      const std::string label = std::string("variant-") + std::string(kind_name(kind));

      std::size_t kept = 0;
      for (std::size_t draw = 0; draw < cfg.budget && kept < cfg.per_pair; ++draw) {
        const std::uint64_t seed = derive_seed(cfg.seed, label, pid * cfg.budget + draw);
        HybridPath path = sample_path(params, seed);
        const double d = pair_components(path, core, cost.accel_scale).raw();
        if (!(d >= cfg.band_low && d < cfg.band_high)) continue;
        SimTrace trace = run_scenario(scenario, path, independent);
        if (trace.off_road()) continue;
        const bool ok = perturbed ? admissible_collision(trace, cost) : !trace.collision;
        if (!ok) continue;
        archive.add(PathRecord{0, kind, label_for(kind), std::move(path), independent,
                               std::move(trace), pid, {seed, draw, params_digest}});
        ++kept;
      }
      report.added += kept;
      if (kept < cfg.per_pair) report.shortfall += cfg.per_pair - kept;
    }
  }
  if (report.shortfall > 0) {
    spdlog::warn("variant budget exhausted: {} of {} requested variants missing", report.shortfall,
                 report.added + report.shortfall);
  }
  return report;
}

RudimentaryReport generate_rudimentary(Archive& archive, std::size_t count,
                                       const ScenarioConfig& scenario, const HybridParams& base,
                                       const HybridParams& independent_base, std::uint64_t seed) {
  RudimentaryReport report;
  const std::size_t budget = 10 * count;
  const std::string digest = base.digest();
  for (std::size_t draw = 0; draw < budget && report.added < count; ++draw) {
    ++report.draws;
    const std::uint64_t s = derive_seed(seed, "rudimentary", draw);
    HybridPath path = sample_path(base, s);
    HybridPath independent = sample_path(independent_base, derive_seed(seed, "rudimentary-ind", draw));
    SimTrace trace = run_scenario(scenario, path, independent);
    if (trace.collision || trace.off_road()) continue;
    archive.add(PathRecord{0, PathKind::rudimentary, 0, std::move(path), std::move(independent),
                           std::move(trace), std::nullopt, {s, 0, digest}});
    ++report.added;
  }
  if (report.added < count) {
    spdlog::warn("kept {} of {} rudimentary paths in {} draws", report.added, count, report.draws);
  }
  return report;
}

namespace {

Dataset finish_dataset(const Archive& archive, std::vector<std::size_t> ids) {
  std::sort(ids.begin(), ids.end());
  Dataset ds;
  std::string material = archive.digest();
  for (const auto id : ids) {
    const auto& r = archive.record(id);
    (r.label == 1 ? ds.ones : ds.zeros)++;
    material += "|" + std::to_string(id);
  }
  ds.record_ids = std::move(ids);
  ds.digest = sha256_hex(material);
  if (ds.ones == 0 || ds.zeros == 0) {
    ds.warnings.push_back("dataset holds a single class");
    spdlog::warn("dataset holds a single class ({} zeros, {} ones)", ds.zeros, ds.ones);
  }
  return ds;
}

}  // namespace

Dataset compose_dataset(const Archive& archive, const std::map<PathKind, std::size_t>& mix) {
  std::vector<std::size_t> ids;
  std::string shortfalls;
  for (const auto& [kind, wanted] : mix) {
    std::size_t taken = 0;
    for (const auto& r : archive.records()) {
      if (taken == wanted) break;
      if (r.kind == kind) {
        ids.push_back(r.id);
        ++taken;
      }
    }
    if (taken < wanted) {
      if (!shortfalls.empty()) shortfalls += "; ";
      shortfalls += std::string(kind_name(kind)) + " needs " + std::to_string(wanted) + " has " +
                    std::to_string(taken);
    }
  }
  if (!shortfalls.empty()) throw std::invalid_argument("insufficient records: " + shortfalls);
  return finish_dataset(archive, std::move(ids));
}

Dataset compose_dataset(const Archive& archive) {
  std::vector<std::size_t> ids(archive.records().size());
  std::iota(ids.begin(), ids.end(), 0);
  return finish_dataset(archive, std::move(ids));
}

}  // namespace hybridpair
