#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <optional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybridpair/cost_model.hpp"
#include "hybridpair/hybrid_dist.hpp"
#include "hybridpair/lane_sim.hpp"
#include "hybridpair/parallel.hpp"
#include "hybridpair/rng.hpp"

namespace hybridpair {

struct CEConfig {
  std::size_t batch_size = 100;
  double rho = 0.1;
  double alpha = 0.8;
  std::size_t stall_depth = 3;
  std::size_t max_iterations = 60;
  std::uint64_t seed = 0;
  WeightMode weight_mode = WeightMode::unit;
  /// Two gamma values closer than this count as unchanged for the stall test.
  double gamma_tolerance = 0.0;

  /// ceil(rho * N), guarded against representation error in rho.
  std::size_t elite_size() const { return elite_size_for(batch_size); }
  std::size_t elite_size_for(std::size_t n) const;
  void validate() const;
};

struct IterationReport {
  std::size_t iteration = 0;
  double gamma = 0.0;
  double best_score = 0.0;
  std::size_t elite_size = 0;
  std::string params_digest;
};

enum class Orientation { minimize, maximize };

struct EliteSelection {
  double gamma = 0.0;
  std::vector<std::size_t> indices;  // best first
};

/// Gamma element and elite of a scored batch. The elite holds exactly
/// ceil(rho * N) indices ordered by rank, ties broken by lower index; gamma is
/// the score of the last elite member.
EliteSelection elite_select(std::span<const double> scores, double rho, Orientation orientation);

/// A sampling distribution CE can refit from weighted elites and smooth.
template <class F>
concept UpdatableFamily = requires(const F& f, std::uint64_t seed,
                                   std::span<const typename F::Sample> elite,
                                   std::span<const double> weights, double alpha) {
  typename F::Sample;
  { f.sample(seed) } -> std::same_as<typename F::Sample>;
  { f.refit(elite, weights) } -> std::same_as<F>;
  { f.blend(f, alpha) } -> std::same_as<F>;
  { f.digest() } -> std::convertible_to<std::string>;
};

/// Independent normals, one per coordinate.
class GaussianFamily {
 public:
  using Sample = std::vector<double>;

  GaussianFamily(std::vector<double> means, std::vector<double> variances,
                 double var_floor = kVarianceFloor);

  Sample sample(std::uint64_t seed) const;
  GaussianFamily refit(std::span<const Sample> elite, std::span<const double> weights) const;
  /// alpha * this + (1 - alpha) * previous.
  GaussianFamily blend(const GaussianFamily& previous, double alpha) const;
  std::string digest() const;

  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& variances() const { return vars_; }

 private:
  std::vector<double> means_;
  std::vector<double> vars_;
  double var_floor_;
};

/// Independent categorical components.
class CategoricalFamily {
 public:
  using Sample = std::vector<std::size_t>;

  explicit CategoricalFamily(std::vector<CategoricalStep> rows);

  Sample sample(std::uint64_t seed) const;
  CategoricalFamily refit(std::span<const Sample> elite, std::span<const double> weights) const;
  CategoricalFamily blend(const CategoricalFamily& previous, double alpha) const;
  std::string digest() const;

  const std::vector<CategoricalStep>& rows() const { return rows_; }

 private:
  std::vector<CategoricalStep> rows_;
};

/// HybridParams behind the family interface.
class HybridFamily {
 public:
  using Sample = HybridPath;

  explicit HybridFamily(HybridParams params) : params_(std::move(params)) {}

  Sample sample(std::uint64_t seed) const { return sample_path(params_, seed); }
  HybridFamily refit(std::span<const Sample> elite, std::span<const double> weights) const {
    return HybridFamily(update_params(elite, weights, params_.move_count()));
  }
  HybridFamily blend(const HybridFamily& previous, double alpha) const {
    return HybridFamily(smooth(params_, previous.params_, alpha));
  }
  std::string digest() const { return params_.digest(); }

  const HybridParams& params() const { return params_; }

 private:
  HybridParams params_;
};

static_assert(UpdatableFamily<GaussianFamily>);
static_assert(UpdatableFamily<CategoricalFamily>);
static_assert(UpdatableFamily<HybridFamily>);

template <class F>
struct CeResult {
  typename F::Sample best;
  double best_score = 0.0;
  std::vector<IterationReport> history;
  F family;
  bool stalled = false;  // stopped on the gamma stall test rather than the iteration cap
};

/// Generic CE optimisation: sample, score, select the elite at the rho quantile,
/// refit, smooth; stop once gamma has been unchanged over `stall_depth`
/// consecutive iterations or at the iteration cap. Non-finite scores drop
/// their sample; a batch with no finite score throws.
template <UpdatableFamily F>
CeResult<F> ce_optimize(const std::function<double(const typename F::Sample&)>& objective,
                        F family, const CEConfig& cfg,
                        Orientation orientation = Orientation::maximize) {
  cfg.validate();
  using Sample = typename F::Sample;
  const bool maximize = orientation == Orientation::maximize;
  std::vector<IterationReport> history;
  std::optional<Sample> best;
  double best_score = maximize ? -std::numeric_limits<double>::infinity()
                               : std::numeric_limits<double>::infinity();
  bool stalled = false;

  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    const std::size_t n = cfg.batch_size;
    std::vector<Sample> samples(n);
    std::vector<double> scores(n);
    parallel_for(n, [&](std::size_t k) {
      samples[k] = family.sample(derive_seed(cfg.seed, "ce-sample", (it - 1) * n + k));
      scores[k] = objective(samples[k]);
    });

    std::vector<std::size_t> finite;
    std::vector<double> finite_scores;
    for (std::size_t k = 0; k < n; ++k) {
      if (std::isfinite(scores[k])) {
        finite.push_back(k);
        finite_scores.push_back(scores[k]);
      }
    }
    if (finite.empty()) throw std::runtime_error("degenerate objective");

    const auto sel = elite_select(finite_scores, cfg.rho, orientation);
    const std::size_t top = finite[sel.indices.front()];
    if (!best || (maximize ? scores[top] > best_score : scores[top] < best_score)) {
      best = samples[top];
      best_score = scores[top];
    }

    std::vector<Sample> elite;
    elite.reserve(sel.indices.size());
    for (const auto i : sel.indices) elite.push_back(samples[finite[i]]);
    const std::vector<double> weights(elite.size(), 1.0);
    family = family.refit(elite, weights).blend(family, cfg.alpha);

    history.push_back({it, sel.gamma, scores[top], sel.indices.size(), family.digest()});

    const std::size_t d = cfg.stall_depth;
    if (d > 0 && history.size() > d) {
      const double g = history.back().gamma;
      const bool unchanged = std::all_of(history.end() - static_cast<std::ptrdiff_t>(d + 1),
                                         history.end(), [&](const IterationReport& r) {
                                           return std::abs(r.gamma - g) <= cfg.gamma_tolerance;
                                         });
      if (unchanged) {
        stalled = true;
        break;
      }
    }
  }
  return {std::move(*best), best_score, std::move(history), std::move(family), stalled};
}

/// Vanilla, perturbed and independent-adversary parameters evolved together.
struct ParamsTrio {
  HybridParams vanilla;
  HybridParams perturbed;
  HybridParams independent;
};

struct PairSearchState {
  ParamsTrio params;  // after the final update and smoothing
  /// Distribution that produced the terminating batch.
  ParamsTrio terminal_batch;
  DatasetStats archive_stats;
  std::vector<IterationReport> history;
};

struct PairSearchResult {
  PairCandidate pair;
  HybridPath independent;
  CostBreakdown cost;
  PairSearchState state;
  std::size_t iteration = 0;  // iteration that produced the returned pair
  std::uint64_t seed = 0;
};

class SearchExhausted : public std::runtime_error {
 public:
  explicit SearchExhausted(PairSearchState state)
      : std::runtime_error("search-exhausted"), state_(std::move(state)) {}
  const PairSearchState& state() const { return state_; }

 private:
  PairSearchState state_;
};

/// HybridPair CE search for a close vanilla / perturbed pair of adversary paths.
/// Lower scores are better. Stops once the gamma element is a compliant pair
/// with a negative score and returns the best compliant pair seen.
PairSearchResult hybrid_pair_search(const CEConfig& cfg, const ScenarioConfig& scenario,
                                    const CostConfig& cost, const DatasetStats& stats);

/// Same search started from explicit parameters.
PairSearchResult hybrid_pair_search(const CEConfig& cfg, const ScenarioConfig& scenario,
                                    const CostConfig& cost, const DatasetStats& stats,
                                    const ParamsTrio& initial);

nlohmann::json to_json(const IterationReport& report);

}  // namespace hybridpair
