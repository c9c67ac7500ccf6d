#include "hybridpair/ce_engine.hpp"

#include <numeric>
#include <optional>

#include "hybridpair/digest.hpp"

namespace hybridpair {

std::size_t CEConfig::elite_size_for(std::size_t n) const {
  const auto e = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(e, 1, std::max<std::size_t>(n, 1));
}

void CEConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in (0, 1]");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (elite_size() < 2) throw std::invalid_argument("ceil(rho * batch_size) must be at least 2");
  if (max_iterations == 0) throw std::invalid_argument("max_iterations must be positive");
  if (gamma_tolerance < 0.0) throw std::invalid_argument("gamma_tolerance must be >= 0");
}

EliteSelection elite_select(std::span<const double> scores, double rho, Orientation orientation) {
  if (scores.empty()) throw std::invalid_argument("cannot select an elite from no scores");
  CEConfig sizing;
  sizing.rho = rho;
  const std::size_t ne = sizing.elite_size_for(scores.size());

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  if (orientation == Orientation::minimize) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  }
  order.resize(ne);
  return {scores[order.back()], std::move(order)};
}

GaussianFamily::GaussianFamily(std::vector<double> means, std::vector<double> variances,
                               double var_floor)
    : means_(std::move(means)), vars_(std::move(variances)), var_floor_(var_floor) {
  if (means_.size() != vars_.size() || means_.empty()) {
    throw std::invalid_argument("gaussian family needs matching non-empty means and variances");
  }
  for (double& v : vars_) v = std::max(v, var_floor_);
}

GaussianFamily::Sample GaussianFamily::sample(std::uint64_t seed) const {
  Rng rng(seed);
  Sample x(means_.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal(means_[i], vars_[i]);
  return x;
}

GaussianFamily GaussianFamily::refit(std::span<const Sample> elite,
                                     std::span<const double> weights) const {
  if (elite.empty()) throw std::invalid_argument("empty elite set");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> m(means_.size(), 0.0);
  std::vector<double> v(means_.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t k = 0; k < elite.size(); ++k) m[i] += weights[k] * elite[k][i];
    m[i] /= total;
    for (std::size_t k = 0; k < elite.size(); ++k) {
      const double d = elite[k][i] - m[i];
      v[i] += weights[k] * d * d;
    }
    v[i] /= total;
  }
  return GaussianFamily(std::move(m), std::move(v), var_floor_);
}

GaussianFamily GaussianFamily::blend(const GaussianFamily& previous, double alpha) const {
  std::vector<double> m(means_.size());
  std::vector<double> v(means_.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = alpha * means_[i] + (1.0 - alpha) * previous.means_[i];
    v[i] = alpha * vars_[i] + (1.0 - alpha) * previous.vars_[i];
  }
  return GaussianFamily(std::move(m), std::move(v), var_floor_);
}

std::string GaussianFamily::digest() const {
  return sha256_hex(nlohmann::json{{"means", means_}, {"vars", vars_}}.dump());
}

CategoricalFamily::CategoricalFamily(std::vector<CategoricalStep> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw std::invalid_argument("categorical family needs at least one component");
}

CategoricalFamily::Sample CategoricalFamily::sample(std::uint64_t seed) const {
  Rng rng(seed);
  Sample x(rows_.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.categorical(rows_[i].probs());
  return x;
}

CategoricalFamily CategoricalFamily::refit(std::span<const Sample> elite,
                                           std::span<const double> weights) const {
  if (elite.empty()) throw std::invalid_argument("empty elite set");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<CategoricalStep> rows;
  rows.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    std::vector<double> p(rows_[i].size(), 0.0);
    for (std::size_t k = 0; k < elite.size(); ++k) p.at(elite[k][i]) += weights[k];
    for (double& x : p) x /= total;
    rows.emplace_back(std::move(p));
  }
  return CategoricalFamily(std::move(rows));
}

CategoricalFamily CategoricalFamily::blend(const CategoricalFamily& previous, double alpha) const {
  std::vector<CategoricalStep> rows;
  rows.reserve(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    std::vector<double> p(rows_[i].size());
    double sum = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] = alpha * rows_[i][j] + (1.0 - alpha) * previous.rows_[i][j];
      sum += p[j];
    }
    for (double& x : p) x /= sum;
    rows.emplace_back(std::move(p));
  }
  return CategoricalFamily(std::move(rows));
}

std::string CategoricalFamily::digest() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows_) j.push_back(std::vector<double>(r.probs().begin(), r.probs().end()));
  return sha256_hex(j.dump());
}

namespace {

struct Candidate {
  HybridPath vanilla;
  HybridPath perturbed;
  HybridPath independent;
  SimTrace vanilla_trace;
  SimTrace perturbed_trace;
  CostBreakdown cost;
};

/// Weights of the elite paths of one component; unsupported paths are dropped.
std::pair<std::vector<HybridPath>, std::vector<double>> weighted_elite(
    const std::vector<HybridPath>& elite, WeightMode mode, const HybridParams& reference,
    const HybridParams& current) {
  ImportanceWeightConfig wcfg{mode, std::nullopt};
  if (mode == WeightMode::likelihood_ratio) wcfg.reference = reference;
  std::vector<HybridPath> kept;
  std::vector<double> weights;
  for (const auto& p : elite) {
    if (const auto w = importance_weight(p, wcfg, current)) {
      kept.push_back(p);
      weights.push_back(*w);
    }
  }
  return {std::move(kept), std::move(weights)};
}

HybridParams refit_component(const std::vector<HybridPath>& elite, const CEConfig& cfg,
                             const HybridParams& reference, const HybridParams& current) {
  auto [kept, weights] = weighted_elite(elite, cfg.weight_mode, reference, current);
  if (kept.empty()) return current;
  return smooth(update_params(kept, weights, current.move_count()), current, cfg.alpha);
}

std::string trio_digest(const ParamsTrio& trio) {
  return sha256_hex(trio.vanilla.digest() + trio.perturbed.digest() + trio.independent.digest());
}

}  // namespace

PairSearchResult hybrid_pair_search(const CEConfig& cfg, const ScenarioConfig& scenario,
                                    const CostConfig& cost, const DatasetStats& stats) {
  const HybridParams adv = scenario.adversary_params();
  return hybrid_pair_search(cfg, scenario, cost, stats,
                            ParamsTrio{adv, adv, scenario.independent_params()});
}

PairSearchResult hybrid_pair_search(const CEConfig& cfg, const ScenarioConfig& scenario,
                                    const CostConfig& cost, const DatasetStats& stats,
                                    const ParamsTrio& initial) {
  cfg.validate();
  scenario.validate();
  cost.validate();
  const std::size_t steps = scenario.path_steps();
  for (const auto* p : {&initial.vanilla, &initial.perturbed, &initial.independent}) {
    if (p->horizon() != steps) throw std::invalid_argument("initial params horizon mismatch");
  }
  if (initial.vanilla.move_count() != initial.perturbed.move_count()) {
    throw std::invalid_argument("vanilla and perturbed params differ in move alphabet");
  }

  ParamsTrio current = initial;
  ParamsTrio sampled_from = initial;
  std::vector<IterationReport> history;
  std::optional<Candidate> best;
  std::size_t best_iteration = 0;
  const std::size_t n = cfg.batch_size;

  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    std::vector<Candidate> batch(n);
    parallel_for(n, [&](std::size_t k) {
      const std::uint64_t counter = (it - 1) * n + k;
      Candidate& c = batch[k];
      c.vanilla = sample_path(current.vanilla, derive_seed(cfg.seed, "vanilla", counter));
      c.perturbed = sample_path(current.perturbed, derive_seed(cfg.seed, "perturbed", counter));
      c.independent = sample_path(current.independent, derive_seed(cfg.seed, "independent", counter));
      c.vanilla_trace = run_scenario(scenario, c.vanilla, c.independent);
      c.perturbed_trace = run_scenario(scenario, c.perturbed, c.independent);
      PairCandidate pair{{c.vanilla, c.vanilla_trace}, {c.perturbed, c.perturbed_trace}};
      c.cost = total_cost(pair, stats, cost);
    });

    std::vector<double> scores(n);
    for (std::size_t k = 0; k < n; ++k) scores[k] = batch[k].cost.total;
    const auto sel = elite_select(scores, cfg.rho, Orientation::minimize);

    for (const auto i : sel.indices) {
      const auto& c = batch[i];
      if (c.cost.compliant() && (!best || c.cost.total < best->cost.total)) {
        best = c;
        best_iteration = it;
      }
    }

    std::vector<HybridPath> ev, ep, ei;
    for (const auto i : sel.indices) {
      ev.push_back(batch[i].vanilla);
      ep.push_back(batch[i].perturbed);
      ei.push_back(batch[i].independent);
    }
    sampled_from = current;
    current = ParamsTrio{refit_component(ev, cfg, initial.vanilla, current.vanilla),
                         refit_component(ep, cfg, initial.perturbed, current.perturbed),
                         refit_component(ei, cfg, initial.independent, current.independent)};

    history.push_back({it, sel.gamma, scores[sel.indices.front()], sel.indices.size(),
                       trio_digest(current)});

    const auto& gamma_cost = batch[sel.indices.back()].cost;
    if (gamma_cost.compliant() && gamma_cost.total < 0.0) {
      PairSearchResult result{
          PairCandidate{{best->vanilla, best->vanilla_trace}, {best->perturbed, best->perturbed_trace}},
          best->independent,
          best->cost,
          PairSearchState{current, sampled_from, stats, std::move(history)},
          best_iteration,
          cfg.seed};
      return result;
    }
  }
  throw SearchExhausted(PairSearchState{current, sampled_from, stats, std::move(history)});
}

nlohmann::json to_json(const IterationReport& report) {
  return {{"iteration", report.iteration},
          {"gamma", report.gamma},
          {"best_score", report.best_score},
          {"elite_size", report.elite_size},
          {"params_digest", report.params_digest}};
}

}  // namespace hybridpair
