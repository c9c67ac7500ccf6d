#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hybridpair {

/// Relative grid moves available to an adversary at each path step.
enum class Move : std::uint8_t { stay = 0, forward, forward_left, forward_right, left, right };

inline constexpr std::size_t kMoveCount = 6;

/// Cell displacement of a move: `lon` along the road, `lat` towards the left edge.
struct GridDelta {
  int lon = 0;
  int lat = 0;
};

constexpr GridDelta move_delta(std::size_t move) {
  constexpr std::array<GridDelta, kMoveCount> kDeltas{
      {{0, 0}, {1, 0}, {1, 1}, {1, -1}, {0, 1}, {0, -1}}};
  return move < kMoveCount ? kDeltas[move] : GridDelta{};
}

std::string_view move_name(std::size_t move);

/// Lower bound applied to every Gaussian variance after an update.
inline constexpr double kVarianceFloor = 1e-4;

/// Probability vector over the move alphabet for one path step.
class CategoricalStep {
 public:
  /// Throws std::invalid_argument unless probs is non-empty, non-negative and sums to 1.
  explicit CategoricalStep(std::vector<double> probs);

  static CategoricalStep uniform(std::size_t moves);
  static CategoricalStep one_hot(std::size_t moves, std::size_t hot);

  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t j) const { return probs_[j]; }
  std::size_t size() const { return probs_.size(); }

  friend bool operator==(const CategoricalStep&, const CategoricalStep&) = default;

 private:
  std::vector<double> probs_;
};

struct GaussianStep {
  double mean = 0.0;  // m/s^2
  double var = 1.0;   // (m/s^2)^2

  friend bool operator==(const GaussianStep&, const GaussianStep&) = default;
};

/// Per-step categorical moves and Gaussian accelerations: the CE parameter vector.
class HybridParams {
 public:
  HybridParams(std::vector<CategoricalStep> cat, std::vector<GaussianStep> gauss,
               double var_floor = kVarianceFloor);

  /// Same categorical row and Gaussian at every one of `horizon` steps.
  static HybridParams stationary(std::size_t horizon, const CategoricalStep& row, GaussianStep g);

  std::size_t horizon() const { return cat_.size(); }
  std::size_t move_count() const { return cat_.front().size(); }
  const std::vector<CategoricalStep>& cat() const { return cat_; }
  const std::vector<GaussianStep>& gauss() const { return gauss_; }

  /// Hash of the canonical JSON encoding.
  std::string digest() const;

  friend bool operator==(const HybridParams&, const HybridParams&) = default;

 private:
  std::vector<CategoricalStep> cat_;
  std::vector<GaussianStep> gauss_;
};

/// One sampled adversary path: a move index and an acceleration per step.
struct HybridPath {
  std::vector<std::uint8_t> moves;
  std::vector<double> accels;

  std::size_t horizon() const { return moves.size(); }

  friend bool operator==(const HybridPath&, const HybridPath&) = default;
};

enum class WeightMode { unit, likelihood_ratio };

struct ImportanceWeightConfig {
  WeightMode mode = WeightMode::unit;
  std::optional<HybridParams> reference;

  void validate() const;
};

HybridPath sample_path(const HybridParams& params, std::uint64_t seed);

/// Weighted elite frequency of each move at each step.
std::vector<CategoricalStep> update_categorical(std::span<const HybridPath> elite,
                                                std::span<const double> weights,
                                                std::size_t move_count);

/// Weighted elite mean and second central moment of the acceleration at each step.
std::vector<GaussianStep> update_gaussian(std::span<const HybridPath> elite,
                                          std::span<const double> weights,
                                          double var_floor = kVarianceFloor);

/// Refit of both components from an elite set.
HybridParams update_params(std::span<const HybridPath> elite, std::span<const double> weights,
                           std::size_t move_count, double var_floor = kVarianceFloor);

/// alpha * fresh + (1 - alpha) * previous, componentwise.
HybridParams smooth(const HybridParams& fresh, const HybridParams& previous, double alpha,
                    double var_floor = kVarianceFloor);

/// Log density of `path` under `params`; nullopt when a move has zero probability.
std::optional<double> log_density(const HybridPath& path, const HybridParams& params);

/// Likelihood-ratio weight f(path; reference) / f(path; current), or 1 in unit mode.
/// nullopt marks a path the ratio cannot support; such paths are left out of the elite.
std::optional<double> importance_weight(const HybridPath& path, const ImportanceWeightConfig& cfg,
                                        const HybridParams& current);

nlohmann::json to_json(const HybridParams& params);
HybridParams params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HybridPath& path);
HybridPath path_from_json(const nlohmann::json& j);

/// One JSON object per line; `role` names the vehicle the parameters drive.
void write_params_record(std::ostream& out, const std::string& role, const HybridParams& params);

}  // namespace hybridpair
