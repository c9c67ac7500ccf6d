#include "hybridpair/mlcp.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "hybridpair/digest.hpp"
#include "hybridpair/parallel.hpp"
#include "hybridpair/rng.hpp"

namespace hybridpair {
namespace {

double gini(std::size_t ones, std::size_t n) {
  if (n == 0) return 0.0;
  const double p = static_cast<double>(ones) / static_cast<double>(n);
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
}

struct BestSplit {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

class TreeGrower {
 public:
  TreeGrower(const FeatureMatrix& m, const ForestConfig& cfg, std::uint64_t seed)
      : m_(m), cfg_(cfg), rng_(seed), k_(cfg.split_features(m.cols())) {}

  DecisionTree grow(const std::vector<std::size_t>& rows) {
    build(rows, 0);
    return std::move(tree_);
  }

 private:
  int build(const std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::size_t ones = 0;
    for (const auto r : rows) ones += static_cast<std::size_t>(m_.labels[r]);
    const std::size_t n = rows.size();
    tree_.nodes[id].leaf_class = 2 * ones >= n ? 1 : 0;

    const bool pure = ones == 0 || ones == n;
    const bool depth_cap = cfg_.max_depth > 0 && depth >= cfg_.max_depth;
    if (pure || depth_cap || n < 2 * cfg_.min_samples_leaf) return id;

    const BestSplit best = find_split(rows, ones);
    if (best.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (const auto r : rows) {
      (m_.row(r)[best.feature] <= best.threshold ? left : right).push_back(r);
    }
    tree_.nodes[id].feature = best.feature;
    tree_.nodes[id].threshold = best.threshold;
    const int l = build(left, depth + 1);
    const int rr = build(right, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = rr;
    return id;
  }

  std::vector<std::size_t> candidates() {
    const std::size_t p = m_.cols();
    std::vector<std::size_t> f(p);
    std::iota(f.begin(), f.end(), 0);
    if (k_ < p) {
      for (std::size_t i = 0; i < k_; ++i) std::swap(f[i], f[i + uniform_index(rng_, p - i)]);
      f.resize(k_);
      std::sort(f.begin(), f.end());
    }
    return f;
  }

  BestSplit find_split(const std::vector<std::size_t>& rows, std::size_t ones) {
    const std::size_t n = rows.size();
    BestSplit best;
    std::vector<std::pair<double, int>> col(n);
    for (const auto f : candidates()) {
      for (std::size_t i = 0; i < n; ++i) col[i] = {m_.row(rows[i])[f], m_.labels[rows[i]]};
      std::sort(col.begin(), col.end());
      std::size_t left_ones = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_ones += static_cast<std::size_t>(col[i].second);
        if (col[i].first == col[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) continue;
        const double imp = (static_cast<double>(nl) * gini(left_ones, nl) +
                            static_cast<double>(nr) * gini(ones - left_ones, nr)) /
                           static_cast<double>(n);
        if (imp < best.impurity) {
          double t = col[i].first + (col[i + 1].first - col[i].first) / 2.0;
          if (!(t < col[i + 1].first)) t = col[i].first;
          best = {static_cast<int>(f), t, imp};
        }
      }
    }
    return best;
  }

  const FeatureMatrix& m_;
  const ForestConfig& cfg_;
  Rng rng_;
  std::size_t k_;
  DecisionTree tree_;
};

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> json_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v).dump() : std::string();
}

nlohmann::json config_json(const ForestConfig& cfg) {
  return {{"n_trees", cfg.n_trees},
          {"max_depth", cfg.max_depth},
          {"min_samples_leaf", cfg.min_samples_leaf},
          {"features_per_split",
           cfg.features_per_split ? nlohmann::json(*cfg.features_per_split) : nlohmann::json(nullptr)},
          {"bootstrap", cfg.bootstrap},
          {"seed", cfg.seed}};
}

}  // namespace

void ForestConfig::validate() const {
  if (n_trees < 1) throw std::invalid_argument("n_trees must be at least 1");
  if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be at least 1");
  if (features_per_split && *features_per_split < 1) {
    throw std::invalid_argument("features_per_split must be at least 1");
  }
}

std::size_t ForestConfig::split_features(std::size_t n_features) const {
  if (features_per_split) return std::min(*features_per_split, n_features);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features))));
}

int DecisionTree::predict(const double* row) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i].leaf_class;
}

DecisionTree grow_tree(const FeatureMatrix& matrix, const std::vector<std::size_t>& rows,
                       const ForestConfig& cfg, std::uint64_t seed) {
  if (rows.empty()) throw std::invalid_argument("cannot grow a tree on zero rows");
  return TreeGrower(matrix, cfg, seed).grow(rows);
}

ForestModel train(const FeatureMatrix& matrix, const ForestConfig& cfg) {
  cfg.validate();
  const std::size_t ones =
      static_cast<std::size_t>(std::count(matrix.labels.begin(), matrix.labels.end(), 1));
  if (ones == 0 || ones == matrix.rows()) throw std::invalid_argument("degenerate labels");
  for (const double v : matrix.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("feature matrix holds non-finite values");
  }
  ForestModel model;
  model.n_features = matrix.cols();
  model.schema_digest = matrix.schema_digest();
  model.trees.resize(cfg.n_trees);
  const std::size_t n = matrix.rows();
  parallel_for(cfg.n_trees, [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(cfg.seed, "tree", t);
    std::vector<std::size_t> rows(n);
    if (cfg.bootstrap) {
      Rng rng(derive_seed(cfg.seed, "bootstrap", t));
      for (auto& r : rows) r = uniform_index(rng, n);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    model.trees[t] = grow_tree(matrix, rows, cfg, seed);
  });
  model.manifest = {{"config", config_json(cfg)}, {"matrix_digest", matrix.digest()}};
  return model;
}

nlohmann::json ForestModel::to_json() const {
  nlohmann::json trees_json = nlohmann::json::array();
  for (const auto& tree : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : tree.nodes) {
      nodes.push_back({nd.feature, nd.threshold, nd.left, nd.right, nd.leaf_class});
    }
    trees_json.push_back(std::move(nodes));
  }
  return {{"format", "hybridpair-forest"},
          {"version", 1},
          {"n_features", n_features},
          {"schema_digest", schema_digest},
          {"manifest", manifest},
          {"trees", std::move(trees_json)}};
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "hybridpair-forest") throw std::invalid_argument("not a forest model");
  ForestModel m;
  m.n_features = j.at("n_features").get<std::size_t>();
  m.schema_digest = j.at("schema_digest").get<std::string>();
  m.manifest = j.at("manifest");
  for (const auto& tj : j.at("trees")) {
    DecisionTree tree;
    for (const auto& nj : tj) {
      TreeNode nd{nj.at(0).get<int>(), nj.at(1).get<double>(), nj.at(2).get<int>(),
                  nj.at(3).get<int>(), nj.at(4).get<int>()};
      const int count = static_cast<int>(tj.size());
      if (nd.feature >= static_cast<int>(m.n_features) ||
          (nd.feature >= 0 && (nd.left <= 0 || nd.right <= 0 || nd.left >= count || nd.right >= count))) {
        throw std::invalid_argument("malformed tree node");
      }
      tree.nodes.push_back(nd);
    }
    if (tree.nodes.empty()) throw std::invalid_argument("empty tree");
    m.trees.push_back(std::move(tree));
  }
  if (m.trees.empty()) throw std::invalid_argument("model has no trees");
  return m;
}

std::string ForestModel::digest() const { return sha256_hex(to_json().dump()); }

Prediction predict(const ForestModel& model, std::span<const double> row) {
  if (row.size() != model.n_features) throw std::invalid_argument("row length does not match model");
  std::size_t votes = 0;
  for (const auto& tree : model.trees) votes += static_cast<std::size_t>(tree.predict(row.data()));
  const std::size_t n = model.trees.size();
  return {2 * votes >= n ? 1 : 0, static_cast<double>(votes) / static_cast<double>(n)};
}

std::vector<Prediction> predict(const ForestModel& model, const FeatureMatrix& matrix) {
  if (matrix.schema_digest() != model.schema_digest) {
    throw std::invalid_argument("feature schema does not match the model");
  }
  std::vector<Prediction> out(matrix.rows());
  parallel_for(matrix.rows(), [&](std::size_t i) {
    out[i] = predict(model, std::span<const double>(matrix.row(i), matrix.cols()));
  });
  return out;
}

double EvalReport::misclassification_rate() const {
  return total() == 0 ? 0.0 : static_cast<double>(misclassified()) / static_cast<double>(total());
}

EvalReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  EvalReport r;
  r.tp = tp;
  r.fp = fp;
  r.tn = tn;
  r.fn = fn;
  r.precision = ratio(tp, tp + fp);
  r.recall = ratio(tp, tp + fn);
  r.specificity = ratio(tn, tn + fp);
  r.false_negative_rate = ratio(fn, tp + fn);
  if (r.precision && r.recall) {
    const double s = *r.precision + *r.recall;
    r.f1 = s > 0.0 ? 2.0 * *r.precision * *r.recall / s : 0.0;
  }
  if (r.recall && r.specificity) r.balanced_accuracy = (*r.recall + *r.specificity) / 2.0;
  return r;
}

EvalReport evaluate(const ForestModel& model, const FeatureMatrix& matrix) {
  if (matrix.rows() == 0) throw std::invalid_argument("cannot evaluate an empty matrix");
  const auto preds = predict(model, matrix);
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool truth = matrix.labels[i] == 1;
    const bool flag = preds[i].label == 1;
    if (truth && flag) ++tp;
    else if (truth) ++fn;
    else if (flag) ++fp;
    else ++tn;
  }
  return report_from_counts(tp, fp, tn, fn);
}

nlohmann::json EvalReport::to_json() const {
  return {{"tp", tp},
          {"fp", fp},
          {"tn", tn},
          {"fn", fn},
          {"precision", opt_json(precision)},
          {"recall", opt_json(recall)},
          {"f1", opt_json(f1)},
          {"specificity", opt_json(specificity)},
          {"balanced_accuracy", opt_json(balanced_accuracy)},
          {"false_negative_rate", opt_json(false_negative_rate)},
          {"misclassified", misclassified()}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  r.tp = j.at("tp").get<std::size_t>();
  r.fp = j.at("fp").get<std::size_t>();
  r.tn = j.at("tn").get<std::size_t>();
  r.fn = j.at("fn").get<std::size_t>();
  r.precision = json_opt(j, "precision");
  r.recall = json_opt(j, "recall");
  r.f1 = json_opt(j, "f1");
  r.specificity = json_opt(j, "specificity");
  r.balanced_accuracy = json_opt(j, "balanced_accuracy");
  r.false_negative_rate = json_opt(j, "false_negative_rate");
  return r;
}

void write_report_csv(std::ostream& out, const EvalReport& r) {
  out << "tp,fp,tn,fn,precision,recall,f1,balanced_accuracy,false_negative_rate\n"
      << r.tp << ',' << r.fp << ',' << r.tn << ',' << r.fn << ',' << fmt_opt(r.precision) << ','
      << fmt_opt(r.recall) << ',' << fmt_opt(r.f1) << ',' << fmt_opt(r.balanced_accuracy) << ','
      << fmt_opt(r.false_negative_rate) << '\n';
}

Split stratified_split(const std::vector<int>& labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  Split split;
  for (const int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) idx.push_back(i);
    }
    Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(cls)));
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * idx.size()));
    split.train.insert(split.train.end(), idx.begin(), idx.begin() + n_train);
    split.test.insert(split.test.end(), idx.begin() + n_train, idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

TrainEval train_evaluate(const FeatureMatrix& matrix, const ForestConfig& cfg,
                         std::uint64_t split_seed) {
  const Split split = stratified_split(matrix.labels, 0.7, split_seed);
  ForestModel model = train(matrix.subset(split.train), cfg);
  EvalReport report = evaluate(model, matrix.subset(split.test));
  return {std::move(model), report};
}

std::vector<SweepRow> notice_sweep(const Archive& archive, const std::vector<std::size_t>& record_ids,
                                   const std::vector<double>& xs, double y, double r,
                                   const ForestConfig& cfg, std::uint64_t split_seed,
                                   const MatrixOptions& options) {
  std::vector<SweepRow> rows;
  for (const double x : xs) {
    SweepRow row{x, std::nullopt, {}};
    try {
      const auto matrix = build_matrix(archive, record_ids, WindowSpec{x, y, r}, options);
      row.report = train_evaluate(matrix, cfg, split_seed).report;
    } catch (const WindowOutOfRange& e) {
      row.note = e.what();
      spdlog::warn("X={} is infeasible: {}", x, e.what());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "x,feasible,tp,fp,tn,fn,precision,recall,f1,balanced_accuracy,false_negative_rate\n";
  for (const auto& row : rows) {
    out << nlohmann::json(row.x).dump() << ',';
    if (!row.report) {
      out << "0,,,,,,,,,\n";
      continue;
    }
    const auto& r = *row.report;
    out << "1," << r.tp << ',' << r.fp << ',' << r.tn << ',' << r.fn << ',' << fmt_opt(r.precision)
        << ',' << fmt_opt(r.recall) << ',' << fmt_opt(r.f1) << ',' << fmt_opt(r.balanced_accuracy)
        << ',' << fmt_opt(r.false_negative_rate) << '\n';
  }
}

EvalReport ablation_eval(const Archive& archive, const std::set<PathKind>& train_kinds,
                         const std::set<PathKind>& test_kinds, const WindowSpec& spec,
                         const ForestConfig& cfg, const MatrixOptions& options) {
  for (const auto k : train_kinds) {
    if (test_kinds.count(k)) {
      throw std::invalid_argument("train and test kinds overlap on " + std::string(kind_name(k)));
    }
  }
  std::vector<std::size_t> train_ids, test_ids;
  for (const auto& rec : archive.records()) {
    if (train_kinds.count(rec.kind)) train_ids.push_back(rec.id);
    if (test_kinds.count(rec.kind)) test_ids.push_back(rec.id);
  }
  if (train_ids.empty() || test_ids.empty()) throw std::invalid_argument("empty partition");
  const auto model = train(build_matrix(archive, train_ids, spec, options), cfg);
  return evaluate(model, build_matrix(archive, test_ids, spec, options));
}

std::vector<MonitorPoint> monitor(const ForestModel& model, const SimTrace& trace,
                                  const WindowSpec& spec, double stride) {
  spec.validate();
  if (!(stride > 0.0)) throw std::invalid_argument("stride must be positive");
  FeatureMatrix schema;
  schema.columns = spec.columns();
  if (schema.schema_digest() != model.schema_digest) {
    throw std::invalid_argument("window does not match the model's feature schema");
  }
  std::vector<MonitorPoint> out;
  const double end = trace.end_time();
  const double eps = 1e-9;
  if (trace.samples.empty() || spec.y > end + eps) {
    spdlog::warn("trace of {} s is shorter than the {} s window", end, spec.y);
    return out;
  }
  for (std::size_t i = 0;; ++i) {
    const double anchor = spec.x + spec.y + static_cast<double>(i) * stride;
    if (anchor - spec.x > end + eps) break;
    const auto values = extract_values(trace, spec, anchor);
    const auto p = predict(model, values);
    out.push_back({anchor, p.label, p.score});
  }
  return out;
}

}  // namespace hybridpair
