#include "hybridpair/hybrid_dist.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "hybridpair/digest.hpp"
#include "hybridpair/rng.hpp"

namespace hybridpair {
namespace {

constexpr double kSumTolerance = 1e-9;

void check_elite(std::span<const HybridPath> elite, std::span<const double> weights) {
  if (elite.empty()) throw std::invalid_argument("empty elite set");
  if (weights.size() != elite.size()) {
    throw std::invalid_argument("elite and weight counts differ");
  }
  const std::size_t horizon = elite.front().horizon();
  double total = 0.0;
  for (std::size_t k = 0; k < elite.size(); ++k) {
    if (elite[k].moves.size() != horizon || elite[k].accels.size() != horizon) {
      throw std::invalid_argument("elite paths differ in horizon");
    }
    if (!(weights[k] >= 0.0) || !std::isfinite(weights[k])) {
      throw std::invalid_argument("elite weights must be finite and non-negative");
    }
    total += weights[k];
  }
  if (!(total > 0.0)) throw std::invalid_argument("elite weights sum to zero");
}

}  // namespace

std::string_view move_name(std::size_t move) {
  static constexpr std::array<std::string_view, kMoveCount> kNames{
      "stay", "forward", "forward_left", "forward_right", "left", "right"};
  return move < kMoveCount ? kNames[move] : "invalid";
}

CategoricalStep::CategoricalStep(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw std::invalid_argument("categorical step needs at least one move");
  double sum = 0.0;
  for (const double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("categorical probabilities must be finite and non-negative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw std::invalid_argument("categorical probabilities must sum to 1");
  }
}

CategoricalStep CategoricalStep::uniform(std::size_t moves) {
  return CategoricalStep(std::vector<double>(moves, 1.0 / static_cast<double>(moves)));
}

CategoricalStep CategoricalStep::one_hot(std::size_t moves, std::size_t hot) {
  std::vector<double> p(moves, 0.0);
  p.at(hot) = 1.0;
  return CategoricalStep(std::move(p));
}

HybridParams::HybridParams(std::vector<CategoricalStep> cat, std::vector<GaussianStep> gauss,
                           double var_floor)
    : cat_(std::move(cat)), gauss_(std::move(gauss)) {
  if (cat_.empty()) throw std::invalid_argument("hybrid params need a positive horizon");
  if (cat_.size() != gauss_.size()) {
    throw std::invalid_argument("categorical and gaussian horizons differ");
  }
  const std::size_t m = cat_.front().size();
  for (const auto& row : cat_) {
    if (row.size() != m) throw std::invalid_argument("move alphabet size varies across steps");
  }
  for (const auto& g : gauss_) {
    if (!std::isfinite(g.mean)) throw std::invalid_argument("gaussian mean must be finite");
    if (!(g.var >= var_floor) || !std::isfinite(g.var)) {
      throw std::invalid_argument("gaussian variance below floor");
    }
  }
}

HybridParams HybridParams::stationary(std::size_t horizon, const CategoricalStep& row,
                                      GaussianStep g) {
  return HybridParams(std::vector<CategoricalStep>(horizon, row),
                      std::vector<GaussianStep>(horizon, g));
}

std::string HybridParams::digest() const { return sha256_hex(to_json(*this).dump()); }

void ImportanceWeightConfig::validate() const {
  if (mode == WeightMode::likelihood_ratio && !reference) {
    throw std::invalid_argument("likelihood-ratio weights need reference params");
  }
}

HybridPath sample_path(const HybridParams& params, std::uint64_t seed) {
  Rng rng(seed);
  HybridPath path;
  path.moves.reserve(params.horizon());
  path.accels.reserve(params.horizon());
  for (std::size_t t = 0; t < params.horizon(); ++t) {
    path.moves.push_back(static_cast<std::uint8_t>(rng.categorical(params.cat()[t].probs())));
    const auto& g = params.gauss()[t];
    path.accels.push_back(rng.normal(g.mean, g.var));
  }
  return path;
}

std::vector<CategoricalStep> update_categorical(std::span<const HybridPath> elite,
                                                std::span<const double> weights,
                                                std::size_t move_count) {
  check_elite(elite, weights);
  const std::size_t horizon = elite.front().horizon();
  double total = 0.0;
  for (const double w : weights) total += w;

  std::vector<CategoricalStep> rows;
  rows.reserve(horizon);
  for (std::size_t i = 0; i < horizon; ++i) {
    std::vector<double> p(move_count, 0.0);
    for (std::size_t k = 0; k < elite.size(); ++k) {
      const std::size_t j = elite[k].moves[i];
      if (j >= move_count) throw std::invalid_argument("move index outside alphabet");
      p[j] += weights[k];
    }
    for (double& v : p) v /= total;
    rows.emplace_back(std::move(p));
  }
  return rows;
}

std::vector<GaussianStep> update_gaussian(std::span<const HybridPath> elite,
                                          std::span<const double> weights, double var_floor) {
  check_elite(elite, weights);
  const std::size_t horizon = elite.front().horizon();
  double total = 0.0;
  for (const double w : weights) total += w;

  std::vector<GaussianStep> steps(horizon);
  for (std::size_t j = 0; j < horizon; ++j) {
    double mean = 0.0;
    for (std::size_t k = 0; k < elite.size(); ++k) mean += weights[k] * elite[k].accels[j];
    mean /= total;
    double var = 0.0;
    for (std::size_t k = 0; k < elite.size(); ++k) {
      const double d = elite[k].accels[j] - mean;
      var += weights[k] * d * d;
    }
    var /= total;
    steps[j] = {mean, std::max(var, var_floor)};
  }
  return steps;
}

HybridParams update_params(std::span<const HybridPath> elite, std::span<const double> weights,
                           std::size_t move_count, double var_floor) {
  return HybridParams(update_categorical(elite, weights, move_count),
                      update_gaussian(elite, weights, var_floor), var_floor);
}

HybridParams smooth(const HybridParams& fresh, const HybridParams& previous, double alpha,
                    double var_floor) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (fresh.horizon() != previous.horizon() || fresh.move_count() != previous.move_count()) {
    throw std::invalid_argument("cannot smooth params of different shape");
  }
  if (alpha == 1.0) return fresh;
  if (alpha == 0.0) return previous;

  std::vector<CategoricalStep> cat;
  std::vector<GaussianStep> gauss;
  cat.reserve(fresh.horizon());
  gauss.reserve(fresh.horizon());
  for (std::size_t t = 0; t < fresh.horizon(); ++t) {
    std::vector<double> p(fresh.move_count());
    double sum = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] = alpha * fresh.cat()[t][j] + (1.0 - alpha) * previous.cat()[t][j];
      sum += p[j];
    }
    for (double& v : p) v /= sum;
    cat.emplace_back(std::move(p));

    const auto& a = fresh.gauss()[t];
    const auto& b = previous.gauss()[t];
    gauss.push_back({alpha * a.mean + (1.0 - alpha) * b.mean,
                     std::max(alpha * a.var + (1.0 - alpha) * b.var, var_floor)});
  }
  return HybridParams(std::move(cat), std::move(gauss), var_floor);
}

std::optional<double> log_density(const HybridPath& path, const HybridParams& params) {
  if (path.horizon() != params.horizon()) {
    throw std::invalid_argument("path and params differ in horizon");
  }
  double lp = 0.0;
  for (std::size_t t = 0; t < path.horizon(); ++t) {
    const double p = params.cat()[t][path.moves[t]];
    if (p <= 0.0) return std::nullopt;
    lp += std::log(p);
    const auto& g = params.gauss()[t];
    const double d = path.accels[t] - g.mean;
    lp += -0.5 * std::log(2.0 * std::numbers::pi * g.var) - 0.5 * d * d / g.var;
  }
  return lp;
}

std::optional<double> importance_weight(const HybridPath& path, const ImportanceWeightConfig& cfg,
                                        const HybridParams& current) {
  cfg.validate();
  if (cfg.mode == WeightMode::unit) return 1.0;
  const auto under_current = log_density(path, current);
  if (!under_current) return std::nullopt;
  const auto under_reference = log_density(path, *cfg.reference);
  if (!under_reference) return std::nullopt;
  const double w = std::exp(*under_reference - *under_current);
  if (!std::isfinite(w) || !(w > 0.0)) return std::nullopt;
  return w;
}

nlohmann::json to_json(const HybridParams& params) {
  nlohmann::json cat = nlohmann::json::array();
  for (const auto& row : params.cat()) {
    cat.push_back(std::vector<double>(row.probs().begin(), row.probs().end()));
  }
  nlohmann::json gauss = nlohmann::json::array();
  for (const auto& g : params.gauss()) gauss.push_back({g.mean, g.var});
  return {{"horizon", params.horizon()},
          {"moves", params.move_count()},
          {"cat", std::move(cat)},
          {"gauss", std::move(gauss)}};
}

HybridParams params_from_json(const nlohmann::json& j) {
  const auto horizon = j.at("horizon").get<std::size_t>();
  const auto moves = j.at("moves").get<std::size_t>();
  std::vector<CategoricalStep> cat;
  std::vector<GaussianStep> gauss;
  for (const auto& row : j.at("cat")) {
    auto p = row.get<std::vector<double>>();
    if (p.size() != moves) throw std::invalid_argument("cat row width does not match `moves`");
    cat.emplace_back(std::move(p));
  }
  for (const auto& g : j.at("gauss")) {
    if (g.size() != 2) throw std::invalid_argument("gauss rows must be [mean, var]");
    gauss.push_back({g[0].get<double>(), g[1].get<double>()});
  }
  if (cat.size() != horizon) throw std::invalid_argument("cat row count does not match `horizon`");
  return HybridParams(std::move(cat), std::move(gauss));
}

nlohmann::json to_json(const HybridPath& path) {
  std::vector<int> moves(path.moves.begin(), path.moves.end());
  return {{"moves", moves}, {"accels", path.accels}};
}

HybridPath path_from_json(const nlohmann::json& j) {
  HybridPath path;
  for (const int m : j.at("moves").get<std::vector<int>>()) {
    if (m < 0 || m >= static_cast<int>(kMoveCount)) {
      throw std::invalid_argument("move index outside alphabet");
    }
    path.moves.push_back(static_cast<std::uint8_t>(m));
  }
  path.accels = j.at("accels").get<std::vector<double>>();
  if (path.accels.size() != path.moves.size()) {
    throw std::invalid_argument("moves and accels differ in length");
  }
  return path;
}

void write_params_record(std::ostream& out, const std::string& role, const HybridParams& params) {
  auto j = to_json(params);
  j["role"] = role;
  out << j.dump() << '\n';
}

}  // namespace hybridpair
