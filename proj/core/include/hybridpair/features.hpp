#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridpair/dataset.hpp"

namespace hybridpair {

inline constexpr std::size_t kFeatureCount = 33;

/// Per-timestep feature order: pairwise (distance, angle) for ego/adv, ego/ind
/// and adv/ind, then velocity, acceleration and angular velocity (x, y, z) for
/// ego, adversary and independent adversary.
const std::array<std::string, kFeatureCount>& feature_names();

std::array<double, kFeatureCount> sample_features(const TraceSample& sample);

/// Sampling window ending X seconds before the anchor, Y seconds long, one
/// sample every R seconds.
struct WindowSpec {
  double x = 1.0;  // gap before the anchor, s
  double y = 2.0;  // window length, s
  double r = 0.2;  // sampling period, s

  void validate() const;
  std::size_t sample_count() const;  // Y/R + 1
  std::size_t row_length() const { return kFeatureCount * sample_count(); }
  /// Column names, feature name suffixed by sample index.
  std::vector<std::string> columns() const;
};

class WindowOutOfRange : public std::runtime_error {
 public:
  explicit WindowOutOfRange(const std::string& detail)
      : std::runtime_error("window-out-of-range: " + detail) {}
};

struct FeatureRow {
  std::vector<double> values;
  int label = 0;
  std::size_t record_id = 0;
  double anchor = 0.0;
};

/// Collision kinds use their own t_collision; other kinds use `pair_context`
/// when given and `fallback` otherwise.
double anchor_time(const PathRecord& record, std::optional<double> pair_context,
                   double fallback);

/// Samples the window [anchor - X - Y, anchor - X], time-major.
std::vector<double> extract_values(const SimTrace& trace, const WindowSpec& spec, double anchor);
FeatureRow extract(const PathRecord& record, const WindowSpec& spec, double anchor);

struct FeatureMatrix {
  std::vector<std::string> columns;
  std::vector<double> values;  // row-major
  std::vector<int> labels;
  std::vector<std::size_t> record_ids;
  std::vector<double> anchors;

  std::size_t rows() const { return labels.size(); }
  std::size_t cols() const { return columns.size(); }
  const double* row(std::size_t i) const { return values.data() + i * cols(); }
  void push_back(const FeatureRow& row);
  FeatureMatrix subset(const std::vector<std::size_t>& rows) const;
  std::string schema_digest() const;
  std::string digest() const;
};

struct MatrixOptions {
  /// Anchor for records without collision or pair; defaults to horizon - 1 s.
  std::optional<double> reference_anchor;
  double horizon = 12.0;
};

/// One row per dataset record in id order. Extraction failures name the record.
FeatureMatrix build_matrix(const Archive& archive, const std::vector<std::size_t>& record_ids,
                           const WindowSpec& spec, const MatrixOptions& options = {});

void write_matrix_csv(std::ostream& out, const FeatureMatrix& matrix);
FeatureMatrix read_matrix_csv(std::istream& in);

}  // namespace hybridpair
