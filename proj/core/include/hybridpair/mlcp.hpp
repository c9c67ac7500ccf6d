#pragma once

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hybridpair/features.hpp"

namespace hybridpair {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;  // 0 = unbounded
  std::size_t min_samples_leaf = 2;
  std::optional<std::size_t> features_per_split;  // default: sqrt of the feature count
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t split_features(std::size_t n_features) const;
};

/// Flat tree node; `feature` is -1 for leaves. Rows with value <= threshold go left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf_class = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // root at 0

  int predict(const double* row) const;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  std::string schema_digest;
  /// Training provenance: dataset and matrix digests, window and forest config.
  nlohmann::json manifest = nlohmann::json::object();

  nlohmann::json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);
  std::string digest() const;
};

/// Grows a single tree on the given rows (duplicates allowed).
DecisionTree grow_tree(const FeatureMatrix& matrix, const std::vector<std::size_t>& rows,
                       const ForestConfig& cfg, std::uint64_t seed);

ForestModel train(const FeatureMatrix& matrix, const ForestConfig& cfg);

struct Prediction {
  int label = 0;
  double score = 0.0;  // fraction of trees voting 1
};

/// Ties go to label 1.
Prediction predict(const ForestModel& model, std::span<const double> row);
/// Checks the matrix schema against the model before predicting every row.
std::vector<Prediction> predict(const ForestModel& model, const FeatureMatrix& matrix);

struct EvalReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> specificity;
  std::optional<double> balanced_accuracy;
  std::optional<double> false_negative_rate;

  std::size_t total() const { return tp + fp + tn + fn; }
  std::size_t misclassified() const { return fp + fn; }
  double misclassification_rate() const;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

EvalReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);
EvalReport evaluate(const ForestModel& model, const FeatureMatrix& matrix);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class shuffle; round(fraction * class size) rows of each class go to training.
Split stratified_split(const std::vector<int>& labels, double train_fraction, std::uint64_t seed);

struct TrainEval {
  ForestModel model;
  EvalReport report;
};

/// Stratified 70/30 split, train on the 70, evaluate on the 30.
TrainEval train_evaluate(const FeatureMatrix& matrix, const ForestConfig& cfg,
                         std::uint64_t split_seed);

struct SweepRow {
  double x = 0.0;
  std::optional<EvalReport> report;  // absent when the window does not fit
  std::string note;
};

std::vector<SweepRow> notice_sweep(const Archive& archive, const std::vector<std::size_t>& record_ids,
                                   const std::vector<double>& xs, double y, double r,
                                   const ForestConfig& cfg, std::uint64_t split_seed,
                                   const MatrixOptions& options = {});

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Trains on every archive record of `train_kinds`, evaluates on `test_kinds`.
EvalReport ablation_eval(const Archive& archive, const std::set<PathKind>& train_kinds,
                         const std::set<PathKind>& test_kinds, const WindowSpec& spec,
                         const ForestConfig& cfg, const MatrixOptions& options = {});

struct MonitorPoint {
  double anchor = 0.0;
  int label = 0;
  double score = 0.0;
};

/// Slides the anchor from X + Y in steps of `stride` while the window stays inside the trace.
std::vector<MonitorPoint> monitor(const ForestModel& model, const SimTrace& trace,
                                  const WindowSpec& spec, double stride);

void write_report_csv(std::ostream& out, const EvalReport& report);

}  // namespace hybridpair
