#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hybridpair/digest.hpp"
#include "pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hybridpair;
using namespace hybridpair::cli;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::size_t> pairs;
  std::string x_values;
  std::string archive;
  std::string matrix;
  std::string model;
  std::string trace;
  double stride = 0.1;
};

class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) {
    if (fs::exists(file())) {
      std::ifstream in(file());
      data_ = json::parse(in);
    } else {
      data_ = {{"files", json::object()}};
    }
  }

  /// Refuses inputs whose content differs from the digest recorded when they were written.
  void verify(const fs::path& path) const {
    if (!fs::exists(path)) throw std::runtime_error("missing artifact " + path.string());
    const auto key = relative(path);
    if (!key || !data_["files"].contains(*key)) return;
    const auto expected = data_["files"][*key].get<std::string>();
    if (sha256_file(path) != expected) {
      throw std::runtime_error("digest mismatch for " + path.string() + ", refusing to run");
    }
  }

  void record(const fs::path& path) {
    if (const auto key = relative(path)) data_["files"][*key] = sha256_file(path);
  }

  void save() const {
    std::ofstream(file()) << data_.dump(2) << '\n';
  }

 private:
  fs::path file() const { return dir_ / "manifest.json"; }

  std::optional<std::string> relative(const fs::path& path) const {
    const auto rel = fs::weakly_canonical(path).lexically_relative(fs::weakly_canonical(dir_));
    if (rel.empty() || *rel.begin() == "..") return std::nullopt;
    return rel.generic_string();
  }

  fs::path dir_;
  json data_;
};

RunConfig load(const Options& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.seed_override) {
    cfg.seed = *o.seed_override;
    cfg.ce.seed = cfg.component_seed("ce");
    cfg.forest.seed = cfg.component_seed("forest");
  }
  if (o.pairs) {
    if (*o.pairs == 0) throw ConfigError(0, "--pairs must be at least 1");
    cfg.dataset.pairs = *o.pairs;
  }
  return cfg;
}

fs::path out_dir(const Options& o, const RunConfig* cfg) {
  fs::path dir = !o.out.empty() ? fs::path(o.out) : cfg ? fs::path(cfg->output_dir) : fs::path("out");
  fs::create_directories(dir);
  return dir;
}

fs::path pick(const std::string& flag, const fs::path& fallback) {
  return flag.empty() ? fallback : fs::path(flag);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing artifact " + path.string());
  return json::parse(in);
}

std::vector<double> parse_x(const std::string& text) {
  std::vector<double> xs;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = std::stoi(text.substr(0, dots));
    const int hi = std::stoi(text.substr(dots + 2));
    if (hi < lo) throw std::invalid_argument("--x range is empty");
    for (int x = lo; x <= hi; ++x) xs.push_back(x);
    return xs;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) xs.push_back(std::stod(item));
  if (xs.empty()) throw std::invalid_argument("--x needs at least one value");
  return xs;
}

Archive load_archive(const fs::path& dir, const Manifest& manifest) {
  manifest.verify(dir / "archive.jsonl");
  manifest.verify(dir / "pairs.jsonl");
  return Archive::load(dir);
}

int cmd_generate(const Options& o) {
  const RunConfig cfg = load(o);
  const fs::path out = out_dir(o, &cfg);
  Manifest manifest(out);

  auto [archive, core, variants, rud] = generate_archive(cfg);
  const fs::path dir = out / "archive";
  archive.save(dir);

  double dist_sum = 0.0;
  for (const auto& p : archive.pairs()) {
    dist_sum += pair_components(archive.record(p.vanilla_id).path,
                                archive.record(p.perturbed_id).path, cfg.cost.accel_scale)
                    .raw();
  }
  json counts = json::object();
  for (const auto k : kAllKinds) counts[std::string(kind_name(k))] = archive.count(k);
  std::size_t it_min = 0, it_max = 0;
  double it_mean = 0.0;
  if (!core.iterations.empty()) {
    it_min = *std::min_element(core.iterations.begin(), core.iterations.end());
    it_max = *std::max_element(core.iterations.begin(), core.iterations.end());
    for (const auto i : core.iterations) it_mean += static_cast<double>(i);
    it_mean /= static_cast<double>(core.iterations.size());
  }
  const json summary{
      {"archive_digest", archive.digest()},
      {"config_digest", sha256_hex(cfg.to_json().dump())},
      {"counts", counts},
      {"core", {{"requested", core.requested}, {"added", core.added}, {"exhausted", core.exhausted}}},
      {"mean_pair_distance", archive.pairs().empty() ? json(nullptr)
                                                     : json(dist_sum / archive.pairs().size())},
      {"ce_iterations", {{"min", it_min}, {"mean", it_mean}, {"max", it_max}}},
      {"variants", {{"added", variants.added}, {"shortfall", variants.shortfall}}},
      {"rudimentary", {{"added", rud.added}, {"draws", rud.draws}}}};
  write_text(out / "generate_summary.json", summary.dump(2) + "\n");

  std::ostringstream text;
  text << "archive " << archive.digest() << "\n";
  for (const auto& [k, v] : counts.items()) text << k << ": " << v << "\n";
  text << "core searches: " << core.added << " of " << core.requested << " succeeded\n";
  if (!archive.pairs().empty()) {
    text << "mean pair distance: " << dist_sum / archive.pairs().size() << "\n";
    text << "CE iterations: min " << it_min << ", mean " << it_mean << ", max " << it_max << "\n";
  }
  write_text(out / "summary.txt", text.str());
  std::cout << text.str();

  for (const char* f : {"archive/archive.jsonl", "archive/pairs.jsonl", "generate_summary.json"}) {
    manifest.record(out / f);
  }
  manifest.save();
  return core.added == 0 ? 1 : 0;
}

int cmd_extract(const Options& o) {
  const RunConfig cfg = load(o);
  const fs::path out = out_dir(o, &cfg);
  Manifest manifest(out);
  const Archive archive = load_archive(pick(o.archive, out / "archive"), manifest);
  const Dataset ds = compose_dataset(archive);
  const FeatureMatrix m = build_matrix(archive, ds.record_ids, cfg.window, cfg.matrix_options());

  std::ostringstream csv;
  write_matrix_csv(csv, m);
  write_text(out / "matrix.csv", csv.str());
  json kinds = json::array();
  for (const auto id : m.record_ids) kinds.push_back(kind_name(archive.record(id).kind));
  const json meta{{"archive_digest", archive.digest()},
                  {"dataset_digest", ds.digest},
                  {"matrix_digest", sha256_hex(csv.str())},
                  {"window", {{"X", cfg.window.x}, {"Y", cfg.window.y}, {"R", cfg.window.r}}},
                  {"record_ids", m.record_ids},
                  {"anchors", m.anchors},
                  {"kinds", kinds},
                  {"ones", ds.ones},
                  {"zeros", ds.zeros}};
  write_text(out / "matrix.json", meta.dump(2) + "\n");
  manifest.record(out / "matrix.csv");
  manifest.record(out / "matrix.json");
  manifest.save();
  std::cout << "matrix " << m.rows() << "x" << m.cols() << " (" << ds.ones << " ones, " << ds.zeros
            << " zeros)\n";
  return 0;
}

FeatureMatrix load_matrix(const fs::path& path, const Manifest& manifest) {
  manifest.verify(path);
  std::ifstream in(path);
  return read_matrix_csv(in);
}

int cmd_train(const Options& o) {
  const RunConfig cfg = load(o);
  const fs::path out = out_dir(o, &cfg);
  Manifest manifest(out);
  const fs::path matrix_path = pick(o.matrix, out / "matrix.csv");
  const FeatureMatrix m = load_matrix(matrix_path, manifest);
  const std::uint64_t split_seed = cfg.component_seed("split");
  const Split split = stratified_split(m.labels, 0.7, split_seed);
  ForestModel model = train(m.subset(split.train), cfg.forest);
  model.manifest["matrix_digest"] = sha256_file(matrix_path);
  model.manifest["split_seed"] = split_seed;
  model.manifest["window"] = {{"X", cfg.window.x}, {"Y", cfg.window.y}, {"R", cfg.window.r}};
  if (fs::exists(out / "matrix.json")) {
    model.manifest["dataset_digest"] = read_json(out / "matrix.json").at("dataset_digest");
  }
  write_text(out / "model.json", model.to_json().dump() + "\n");
  manifest.record(out / "model.json");
  manifest.save();
  std::cout << "model " << model.digest() << " (" << model.trees.size() << " trees)\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const RunConfig cfg = load(o);
  const fs::path out = out_dir(o, &cfg);
  Manifest manifest(out);
  const fs::path model_path = pick(o.model, out / "model.json");
  const fs::path matrix_path = pick(o.matrix, out / "matrix.csv");
  manifest.verify(model_path);
  const ForestModel model = ForestModel::from_json(read_json(model_path));
  const FeatureMatrix m = load_matrix(matrix_path, manifest);
  const auto matrix_digest = sha256_file(matrix_path);
  if (model.manifest.value("matrix_digest", "") != matrix_digest) {
    throw std::runtime_error("matrix digest does not match the model's training manifest, refusing to run");
  }
  const auto split_seed = model.manifest.at("split_seed").get<std::uint64_t>();
  const Split split = stratified_split(m.labels, 0.7, split_seed);
  const EvalReport report = evaluate(model, m.subset(split.test));

  json j = report.to_json();
  j["model_digest"] = model.digest();
  j["matrix_digest"] = matrix_digest;
  write_text(out / "report.json", j.dump(2) + "\n");
  std::ostringstream csv;
  write_report_csv(csv, report);
  write_text(out / "report.csv", csv.str());
  manifest.record(out / "report.json");
  manifest.record(out / "report.csv");
  manifest.save();
  std::cout << csv.str();
  return 0;
}

int cmd_sweep(const Options& o) {
  const RunConfig cfg = load(o);
  const fs::path out = out_dir(o, &cfg);
  Manifest manifest(out);
  const Archive archive = load_archive(pick(o.archive, out / "archive"), manifest);
  const auto xs = o.x_values.empty() ? cfg.sweep_x : parse_x(o.x_values);
  const Dataset ds = compose_dataset(archive);
  const auto rows = notice_sweep(archive, ds.record_ids, xs, cfg.window.y, cfg.window.r, cfg.forest,
                                 cfg.component_seed("split"), cfg.matrix_options());
  std::ostringstream csv;
  csv << "# archive_digest=" << archive.digest() << "\n";
  write_sweep_csv(csv, rows);
  write_text(out / "sweep.csv", csv.str());
  manifest.record(out / "sweep.csv");
  manifest.save();
  std::cout << csv.str();
  return 0;
}

int cmd_monitor(const Options& o) {
  if (o.trace.empty()) throw std::invalid_argument("--trace is required");
  const fs::path out = out_dir(o, nullptr);
  Manifest manifest(out);
  const fs::path model_path = pick(o.model, out / "model.json");
  manifest.verify(model_path);
  const ForestModel model = ForestModel::from_json(read_json(model_path));
  const auto& w = model.manifest.at("window");
  const WindowSpec spec{w.at("X").get<double>(), w.at("Y").get<double>(), w.at("R").get<double>()};
  std::ifstream in(o.trace);
  if (!in) throw std::runtime_error("missing artifact " + o.trace);
  const SimTrace trace = read_trace_csv(in);
  const auto points = monitor(model, trace, spec, o.stride);

  std::ostringstream csv;
  csv << "# model_digest=" << model.digest() << " trace_digest=" << sha256_file(o.trace) << "\n";
  csv << "time,label,score\n";
  for (const auto& p : points) {
    csv << json(p.anchor).dump() << ',' << p.label << ',' << json(p.score).dump() << '\n';
  }
  write_text(out / "monitor.csv", csv.str());
  manifest.record(out / "monitor.csv");
  manifest.save();
  std::size_t flagged = 0;
  for (const auto& p : points) flagged += static_cast<std::size_t>(p.label);
  std::cout << points.size() << " windows, " << flagged << " flagged\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HybridPair cross-entropy scenario generation and collision prediction"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "RunConfig JSON file");
    if (needs_config) c->required();
    sub->add_option("--out", o.out, "output directory (default: config output_dir)");
    sub->add_option("--seed-override", o.seed_override, "replace the config's global seed");
  };

  auto* gen = app.add_subcommand("generate", "build the path archive");
  common(gen, true);
  gen->add_option("--pairs", o.pairs, "number of core pair searches");

  auto* ext = app.add_subcommand("extract", "build the feature matrix from an archive");
  common(ext, true);
  ext->add_option("--archive", o.archive, "archive directory (default: <out>/archive)");

  auto* trn = app.add_subcommand("train", "train the forest on the 70% split");
  common(trn, true);
  trn->add_option("--matrix", o.matrix, "feature matrix CSV (default: <out>/matrix.csv)");

  auto* evl = app.add_subcommand("eval", "evaluate the model on the 30% split");
  common(evl, true);
  evl->add_option("--matrix", o.matrix, "feature matrix CSV (default: <out>/matrix.csv)");
  evl->add_option("--model", o.model, "model file (default: <out>/model.json)");

  auto* swp = app.add_subcommand("sweep", "F1 against advance-notice time X");
  common(swp, true);
  swp->add_option("--x", o.x_values, "X values, e.g. 1..5 or 1,2.5");
  swp->add_option("--archive", o.archive, "archive directory (default: <out>/archive)");

  auto* mon = app.add_subcommand("monitor", "slide the model over a recorded trace");
  common(mon, false);
  mon->add_option("--model", o.model, "model file (default: <out>/model.json)");
  mon->add_option("--trace", o.trace, "trace CSV")->required();
  mon->add_option("--stride", o.stride, "anchor stride in seconds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (ext->parsed()) return cmd_extract(o);
    if (trn->parsed()) return cmd_train(o);
    if (evl->parsed()) return cmd_eval(o);
    if (swp->parsed()) return cmd_sweep(o);
    if (mon->parsed()) return cmd_monitor(o);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
