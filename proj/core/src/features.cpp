#include "hybridpair/features.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "hybridpair/digest.hpp"
#include "hybridpair/parallel.hpp"

namespace hybridpair {
namespace {

constexpr double kGridTolerance = 1e-6;

std::size_t checked_ratio(double num, double den, const char* what) {
  const double q = num / den;
  if (std::abs(q - std::round(q)) > 1e-9 * std::max(1.0, std::abs(q))) {
    throw std::invalid_argument(what);
  }
  return static_cast<std::size_t>(std::llround(q));
}

void append_vehicle(std::array<double, kFeatureCount>& f, std::size_t at, const VehicleState& v) {
  const std::array<double, 9> vals{v.velocity.x,         v.velocity.y,         v.velocity.z,
                                   v.acceleration.x,     v.acceleration.y,     v.acceleration.z,
                                   v.angular_velocity.x, v.angular_velocity.y, v.angular_velocity.z};
  std::copy(vals.begin(), vals.end(), f.begin() + static_cast<std::ptrdiff_t>(at));
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = [] {
    std::array<std::string, kFeatureCount> n;
    std::size_t i = 0;
    for (const char* pair : {"ego_adv", "ego_ind", "adv_ind"}) {
      n[i++] = std::string(pair) + "_distance";
      n[i++] = std::string(pair) + "_angle";
    }
    for (const char* v : {"ego", "adv", "ind"}) {
      for (const char* q : {"vel", "accel", "angvel"}) {
        for (const char* axis : {"x", "y", "z"}) n[i++] = std::string(v) + "_" + q + "_" + axis;
      }
    }
    return n;
  }();
  return names;
}

std::array<double, kFeatureCount> sample_features(const TraceSample& s) {
  std::array<double, kFeatureCount> f{};
  const auto ea = relative_geometry(s.ego, s.adv);
  const auto ei = relative_geometry(s.ego, s.ind);
  const auto ai = relative_geometry(s.adv, s.ind);
  f[0] = ea.distance;
  f[1] = ea.angle;
  f[2] = ei.distance;
  f[3] = ei.angle;
  f[4] = ai.distance;
  f[5] = ai.angle;
  append_vehicle(f, 6, s.ego);
  append_vehicle(f, 15, s.adv);
  append_vehicle(f, 24, s.ind);
  return f;
}

void WindowSpec::validate() const {
  if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("window X must be >= 0");
  if (!(y > 0.0) || !std::isfinite(y)) throw std::invalid_argument("window Y must be > 0");
  if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("window R must be > 0");
  checked_ratio(y, r, "window Y must be a whole number of R periods");
}

std::size_t WindowSpec::sample_count() const {
  return checked_ratio(y, r, "window Y must be a whole number of R periods") + 1;
}

std::vector<std::string> WindowSpec::columns() const {
  std::vector<std::string> cols;
  const std::size_t n = sample_count();
  cols.reserve(n * kFeatureCount);
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& name : feature_names()) cols.push_back(name + "_" + std::to_string(k));
  }
  return cols;
}

double anchor_time(const PathRecord& record, std::optional<double> pair_context, double fallback) {
  if (record.kind == PathKind::perturbed || record.kind == PathKind::variant_perturbed) {
    if (!record.trace.t_collision) {
      throw std::invalid_argument("record " + std::to_string(record.id) +
                                  " is a collision kind without t_collision");
    }
    return *record.trace.t_collision;
  }
  return pair_context.value_or(fallback);
}

std::vector<double> extract_values(const SimTrace& trace, const WindowSpec& spec, double anchor) {
  spec.validate();
  const std::size_t n = spec.sample_count();
  const double start = anchor - spec.x - spec.y;
  std::vector<double> out;
  out.reserve(n * kFeatureCount);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = start + static_cast<double>(k) * spec.r;
    const double idx = t / trace.timestep;
    const double rounded = std::round(idx);
    if (std::abs(idx - rounded) > kGridTolerance) {
      throw std::invalid_argument("sample time is not a multiple of the trace timestep");
    }
    if (rounded < 0.0 || rounded >= static_cast<double>(trace.samples.size())) {
      std::ostringstream msg;
      msg << "t=" << t << " outside [0, " << trace.end_time() << "]";
      throw WindowOutOfRange(msg.str());
    }
    const auto f = sample_features(trace.samples[static_cast<std::size_t>(rounded)]);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

FeatureRow extract(const PathRecord& record, const WindowSpec& spec, double anchor) {
  return {extract_values(record.trace, spec, anchor), record.label, record.id, anchor};
}

void FeatureMatrix::push_back(const FeatureRow& row) {
  if (row.values.size() != cols()) throw std::invalid_argument("row length does not match schema");
  values.insert(values.end(), row.values.begin(), row.values.end());
  labels.push_back(row.label);
  record_ids.push_back(row.record_id);
  anchors.push_back(row.anchor);
}

FeatureMatrix FeatureMatrix::subset(const std::vector<std::size_t>& rows) const {
  FeatureMatrix out;
  out.columns = columns;
  out.values.reserve(rows.size() * cols());
  for (const auto i : rows) {
    out.values.insert(out.values.end(), row(i), row(i) + cols());
    out.labels.push_back(labels.at(i));
    out.record_ids.push_back(record_ids.at(i));
    out.anchors.push_back(anchors.at(i));
  }
  return out;
}

std::string FeatureMatrix::schema_digest() const {
  std::string joined;
  for (const auto& c : columns) joined += c + ",";
  return sha256_hex(joined);
}

std::string FeatureMatrix::digest() const {
  std::ostringstream out;
  write_matrix_csv(out, *this);
  return sha256_hex(out.str());
}

FeatureMatrix build_matrix(const Archive& archive, const std::vector<std::size_t>& record_ids,
                           const WindowSpec& spec, const MatrixOptions& options) {
  spec.validate();
  std::vector<std::size_t> ids = record_ids;
  std::sort(ids.begin(), ids.end());
  const double fallback = options.reference_anchor.value_or(options.horizon - 1.0);

  std::vector<FeatureRow> rows(ids.size());
  std::vector<std::string> errors(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    const auto& rec = archive.record(ids[i]);
    try {
      const double anchor = anchor_time(rec, archive.pair_collision_time(rec), fallback);
      rows[i] = extract(rec, spec, anchor);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (errors[i].empty()) continue;
    const std::string prefix = "window-out-of-range: ";
    const std::string where = "record " + std::to_string(ids[i]) + ": ";
    if (errors[i].rfind(prefix, 0) == 0) throw WindowOutOfRange(where + errors[i].substr(prefix.size()));
    throw std::invalid_argument(where + errors[i]);
  }

  FeatureMatrix m;
  m.columns = spec.columns();
  m.values.reserve(ids.size() * m.cols());
  for (const auto& r : rows) m.push_back(r);
  return m;
}

void write_matrix_csv(std::ostream& out, const FeatureMatrix& m) {
  for (const auto& c : m.columns) out << c << ',';
  out << "label\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out << format_double(r[j]) << ',';
    out << m.labels[i] << '\n';
  }
}

FeatureMatrix read_matrix_csv(std::istream& in) {
  FeatureMatrix m;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("matrix file is empty");
  {
    std::istringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) m.columns.push_back(cell);
    if (m.columns.empty() || m.columns.back() != "label") {
      throw std::invalid_argument("matrix header must end with a label column");
    }
    m.columns.pop_back();
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    FeatureRow row;
    row.record_id = m.rows();
    const char* p = line.data();
    const char* end = p + line.size();
    for (std::size_t j = 0; j <= m.cols(); ++j) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc() || (res.ptr != end && *res.ptr != ',')) {
        throw std::invalid_argument("matrix line " + std::to_string(line_no) + ": bad value");
      }
      if (j == m.cols()) {
        if (res.ptr != end || (v != 0.0 && v != 1.0)) {
          throw std::invalid_argument("matrix line " + std::to_string(line_no) + ": bad label");
        }
        row.label = static_cast<int>(v);
      } else {
        row.values.push_back(v);
        if (res.ptr == end) {
          throw std::invalid_argument("matrix line " + std::to_string(line_no) + ": short row");
        }
      }
      p = res.ptr + (res.ptr == end ? 0 : 1);
    }
    m.push_back(row);
  }
  return m;
}

}  // namespace hybridpair
