/*
 * Copyright 2026 The fedhp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Hyperparameter search over discrete spaces: Pareto dominance, grid search,
// NSGA-II, greedy response tables and constrained selection.

#ifndef FEDHP_SEARCH_HPP
#define FEDHP_SEARCH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "fedhp/core.hpp"
#include "fedhp/tensor.hpp"

namespace fedhp::search {

/// omega = (eta, mu, lambda, E, B); the same shape serves benign and malicious.
struct HyperTuple {
  double eta = 0.1;
  double mu = 0.9;
  double lambda = 0.0005;
  int epochs = 2;
  int batch_size = 64;

  SgdConfig to_sgd() const { return {eta, mu, lambda, epochs, batch_size}; }
  static HyperTuple from_sgd(const SgdConfig& c) { return {c.eta, c.mu, c.lambda, c.epochs, c.batch_size}; }

  friend bool operator==(const HyperTuple&, const HyperTuple&) = default;
  friend auto operator<=>(const HyperTuple&, const HyperTuple&) = default;
};

inline constexpr std::size_t kNumParams = 5;
inline constexpr std::array<std::string_view, kNumParams> kParamNames{"eta", "mu", "lambda", "E", "B"};

inline std::size_t param_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumParams; ++i)
    if (kParamNames[i] == name) return i;
  throw ConfigError("unknown hyperparameter '" + std::string(name) + "' (eta|mu|lambda|E|B)");
}

inline double get_param(const HyperTuple& h, std::size_t p) {
  switch (p) {
    case 0: return h.eta;
    case 1: return h.mu;
    case 2: return h.lambda;
    case 3: return h.epochs;
    case 4: return h.batch_size;
  }
  throw ContractViolation("parameter index out of range");
}

inline void set_param(HyperTuple& h, std::size_t p, double v) {
  switch (p) {
    case 0: h.eta = v; return;
    case 1: h.mu = v; return;
    case 2: h.lambda = v; return;
    case 3: h.epochs = static_cast<int>(std::lround(v)); return;
    case 4: h.batch_size = static_cast<int>(std::lround(v)); return;
  }
  throw ContractViolation("parameter index out of range");
}

using Genome = std::array<std::size_t, kNumParams>;

/// One finite domain per hyperparameter, in kParamNames order.
struct SearchSpace {
  std::array<std::vector<double>, kNumParams> domains{
      std::vector<double>{0.1}, {0.9}, {0.0005}, {2}, {64}};

  /// Benign space of the frontier search: 3 * 1 * 2 * 2 * 2 = 24 points.
  static SearchSpace frontier_default() {
    SearchSpace s;
    s.domains = {std::vector<double>{0.1, 0.15, 0.2}, {0.9}, {0.0005, 0.001}, {10, 20}, {16, 32}};
    return s;
  }

  void validate() const {
    for (std::size_t p = 0; p < kNumParams; ++p) {
      if (domains[p].empty()) throw ConfigError("search domain for " + std::string(kParamNames[p]) + " is empty");
      for (double v : domains[p]) {
        if (!std::isfinite(v)) throw ConfigError("search domain values must be finite");
        if (p >= 3 && (v < 1 || v != std::floor(v)))
          throw ConfigError(std::string(kParamNames[p]) + " domain needs positive integers");
      }
    }
  }

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& d : domains) n *= d.size();
    return n;
  }

  HyperTuple at(const Genome& g) const {
    HyperTuple h;
    for (std::size_t p = 0; p < kNumParams; ++p) set_param(h, p, domains[p][g[p]]);
    return h;
  }

  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;
};

struct SolutionPoint {
  HyperTuple omega;
  double mta = 0.0;
  double bda = 0.0;
  bool diverged = false;
};

/// defender: maximize MTA, minimize BDA. adversary: maximize both (BDA up,
/// MTA drop down).
enum class Side { defender, adversary };

/// Strict improvement in both objectives.
inline bool dominates(const SolutionPoint& a, const SolutionPoint& b, Side side = Side::defender) {
  if (a.diverged || b.diverged) throw ContractViolation("dominates is undefined for diverged points");
  if (side == Side::defender) return a.mta > b.mta && a.bda < b.bda;
  return a.mta > b.mta && a.bda > b.bda;
}

namespace detail {

inline bool bda_better(double a, double b, Side side) { return side == Side::defender ? a < b : a > b; }

/// Indices of non-dominated points (diverged skipped) by a sweep over
/// descending MTA, ordered by descending MTA then better BDA then index.
inline std::vector<std::size_t> frontier_indices(const std::vector<SolutionPoint>& pts, Side side) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!pts[i].diverged) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a].mta != pts[b].mta) return pts[a].mta > pts[b].mta;
    return bda_better(pts[a].bda, pts[b].bda, side);
  });
  const double worst = side == Side::defender ? std::numeric_limits<double>::infinity()
                                              : -std::numeric_limits<double>::infinity();
  double best_strictly_above = worst;  // best BDA among points with strictly higher MTA
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < idx.size();) {
    std::size_t h = g;
    double group_best = worst;
    while (h < idx.size() && pts[idx[h]].mta == pts[idx[g]].mta) {
      const double b = pts[idx[h]].bda;
      if (!bda_better(best_strictly_above, b, side)) out.push_back(idx[h]);
      if (bda_better(b, group_best, side)) group_best = b;
      ++h;
    }
    if (bda_better(group_best, best_strictly_above, side)) best_strictly_above = group_best;
    g = h;
  }
  return out;
}

}  // namespace detail

/// All and only the non-dominated, non-diverged points, by descending MTA.
inline std::vector<SolutionPoint> pareto_frontier(const std::vector<SolutionPoint>& points, Side side = Side::defender) {
  std::vector<SolutionPoint> out;
  for (std::size_t i : detail::frontier_indices(points, side)) out.push_back(points[i]);
  return out;
}

using Evaluator = std::function<SolutionPoint(const HyperTuple&)>;

/// Evaluator failures become diverged points.
inline SolutionPoint safe_evaluate(const Evaluator& evaluate, const HyperTuple& omega) {
  try {
    SolutionPoint p = evaluate(omega);
    p.omega = omega;
    if (!p.diverged && !(std::isfinite(p.mta) && std::isfinite(p.bda))) p.diverged = true;
    return p;
  } catch (const std::exception&) {
    return {omega, 0.0, 0.0, true};
  }
}

/// Every point of the Cartesian product once, last parameter fastest.
inline std::vector<SolutionPoint> grid_search(const SearchSpace& space, const Evaluator& evaluate) {
  space.validate();
  std::vector<SolutionPoint> out;
  out.reserve(space.size());
  Genome g{};
  for (std::size_t n = 0; n < space.size(); ++n) {
    out.push_back(safe_evaluate(evaluate, space.at(g)));
    for (std::size_t p = kNumParams; p-- > 0;) {
      if (++g[p] < space.domains[p].size()) break;
      g[p] = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// NSGA-II
// ---------------------------------------------------------------------------

struct Nsga2Options {
  int population = 12;
  int generations = 20;
  std::uint64_t seed = 1;
  double crossover_probability = 0.9;
  Side side = Side::defender;
};

struct Nsga2Result {
  /// Non-dominated set of every evaluated point.
  std::vector<SolutionPoint> front;
  /// Every distinct evaluated point in first-evaluation order.
  std::vector<SolutionPoint> archive;
  std::size_t evaluations = 0;
};

namespace detail {

struct Ranked {
  std::vector<int> rank;
  std::vector<double> crowding;
};

/// Fast non-dominated sort plus crowding distance. Diverged points share the
/// worst rank.
inline Ranked rank_population(const std::vector<SolutionPoint>& pts, Side side) {
  const std::size_t n = pts.size();
  Ranked r{std::vector<int>(n, -1), std::vector<double>(n, 0.0)};
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<int> count(n, 0);
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i) {
    if (pts[i].diverged) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || pts[j].diverged) continue;
      if (dominates(pts[i], pts[j], side))
        dominated[i].push_back(j);
      else if (dominates(pts[j], pts[i], side))
        ++count[i];
    }
    if (count[i] == 0) current.push_back(i);
  }
  std::vector<std::vector<std::size_t>> fronts;
  for (int level = 0; !current.empty(); ++level) {
    fronts.push_back(current);
    std::vector<std::size_t> next;
    for (std::size_t i : current) {
      r.rank[i] = level;
      for (std::size_t j : dominated[i])
        if (--count[j] == 0) next.push_back(j);
    }
    std::sort(next.begin(), next.end());
    current = std::move(next);
  }
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < n; ++i)
    if (pts[i].diverged) {
      r.rank[i] = static_cast<int>(fronts.size());
      bad.push_back(i);
    }
  if (!bad.empty()) fronts.push_back(bad);

  for (const auto& front : fronts) {
    if (front.size() <= 2) {
      for (std::size_t i : front) r.crowding[i] = std::numeric_limits<double>::infinity();
      continue;
    }
    for (int obj = 0; obj < 2; ++obj) {
      auto val = [&](std::size_t i) { return obj == 0 ? pts[i].mta : pts[i].bda; };
      std::vector<std::size_t> f = front;
      std::stable_sort(f.begin(), f.end(), [&](std::size_t a, std::size_t b) { return val(a) < val(b); });
      const double span = val(f.back()) - val(f.front());
      r.crowding[f.front()] = r.crowding[f.back()] = std::numeric_limits<double>::infinity();
      if (span <= 0.0) continue;
      for (std::size_t k = 1; k + 1 < f.size(); ++k) r.crowding[f[k]] += (val(f[k + 1]) - val(f[k - 1])) / span;
    }
  }
  return r;
}

inline bool better(const Ranked& r, std::size_t a, std::size_t b) {
  if (r.rank[a] != r.rank[b]) return r.rank[a] < r.rank[b];
  if (r.crowding[a] != r.crowding[b]) return r.crowding[a] > r.crowding[b];
  return a < b;
}

}  // namespace detail

/// NSGA-II over a discrete space. Returns the non-dominated subset of all
/// evaluated points; repeated genomes are evaluated once.
inline Nsga2Result nsga2(const SearchSpace& space, const Evaluator& evaluate, const Nsga2Options& opt = {}) {
  space.validate();
  if (opt.population < 4 || opt.population % 2 != 0) throw ConfigError("NSGA-II population must be even and >= 4");
  if (opt.generations < 0) throw ConfigError("NSGA-II generations must be >= 0");
  Rng rng = make_rng(opt.seed, {stream_tag("search/nsga2")});

  std::map<Genome, std::size_t> memo;
  Nsga2Result res;
  auto eval_genome = [&](const Genome& g) -> const SolutionPoint& {
    auto it = memo.find(g);
    if (it == memo.end()) {
      it = memo.emplace(g, res.archive.size()).first;
      res.archive.push_back(safe_evaluate(evaluate, space.at(g)));
      ++res.evaluations;
    }
    return res.archive[it->second];
  };
  auto random_genome = [&] {
    Genome g{};
    for (std::size_t p = 0; p < kNumParams; ++p) {
      std::uniform_int_distribution<std::size_t> d(0, space.domains[p].size() - 1);
      g[p] = d(rng);
    }
    return g;
  };

  // Initial population: distinct uniform draws, as many as the space allows.
  const auto pop_size = static_cast<std::size_t>(opt.population);
  const std::size_t target = std::min(pop_size, space.size());
  std::vector<Genome> pop;
  std::set<Genome> seen;
  for (std::size_t tries = 0; pop.size() < target && tries < 1000 * pop_size; ++tries) {
    const Genome g = random_genome();
    if (seen.insert(g).second) pop.push_back(g);
  }
  for (const Genome& g : pop) eval_genome(g);

  auto points_of = [&](const std::vector<Genome>& gs) {
    std::vector<SolutionPoint> pts;
    for (const Genome& g : gs) pts.push_back(eval_genome(g));
    return pts;
  };

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double p_mut = 1.0 / static_cast<double>(kNumParams);
  for (int gen = 0; gen < opt.generations; ++gen) {
    const detail::Ranked ranked = detail::rank_population(points_of(pop), opt.side);
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    auto tournament = [&] {
      const std::size_t a = pick(rng), b = pick(rng);
      return detail::better(ranked, a, b) ? a : b;
    };

    std::vector<Genome> offspring;
    while (offspring.size() < pop_size) {
      Genome c1 = pop[tournament()], c2 = pop[tournament()];
      if (unit(rng) < opt.crossover_probability)
        for (std::size_t p = 0; p < kNumParams; ++p)
          if (unit(rng) < 0.5) std::swap(c1[p], c2[p]);
      for (Genome* c : {&c1, &c2})
        for (std::size_t p = 0; p < kNumParams; ++p) {
          const std::size_t n = space.domains[p].size();
          if (n < 2 || !(unit(rng) < p_mut)) continue;
          // Move to an adjacent domain value.
          if ((*c)[p] == 0)
            (*c)[p] = 1;
          else if ((*c)[p] + 1 == n)
            (*c)[p] = n - 2;
          else
            (*c)[p] += unit(rng) < 0.5 ? std::size_t{1} : std::size_t(-1);
        }
      offspring.push_back(c1);
      offspring.push_back(c2);
    }
    for (const Genome& g : offspring) eval_genome(g);

    // (mu + lambda) survival over distinct genomes.
    std::vector<Genome> merged;
    std::set<Genome> uniq;
    for (const auto* src : {&pop, &offspring})
      for (const Genome& g : *src)
        if (uniq.insert(g).second) merged.push_back(g);
    const detail::Ranked mr = detail::rank_population(points_of(merged), opt.side);
    std::vector<std::size_t> order(merged.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (mr.rank[a] != mr.rank[b]) return mr.rank[a] < mr.rank[b];
      if (mr.crowding[a] != mr.crowding[b]) return mr.crowding[a] > mr.crowding[b];
      return merged[a] < merged[b];
    });
    std::vector<Genome> next;
    for (std::size_t k = 0; k < order.size() && next.size() < pop_size; ++k) next.push_back(merged[order[k]]);
    pop = std::move(next);
  }

  res.front = pareto_frontier(res.archive, opt.side);
  return res;
}

// ---------------------------------------------------------------------------
// Constrained selection
// ---------------------------------------------------------------------------

struct ConstraintSpec {
  double epsilon_def = 0.05;
  double epsilon_adv = 0.05;
  std::optional<double> mta_ideal;
  std::optional<double> mta_clean;
};

/// defender: min BDA s.t. MTA_ideal - mta <= eps_def.
/// adversary: max BDA s.t. MTA_clean - mta <= eps_adv.
/// Ties prefer higher MTA, then the earlier point. None when infeasible.
inline std::optional<SolutionPoint> constrained_best(const std::vector<SolutionPoint>& points,
                                                     const ConstraintSpec& spec, Side side) {
  const std::optional<double>& ref = side == Side::defender ? spec.mta_ideal : spec.mta_clean;
  const double eps = side == Side::defender ? spec.epsilon_def : spec.epsilon_adv;
  if (!ref) throw ContractViolation("constrained_best needs the reference MTA for this side");
  if (!(eps >= 0.0)) throw ContractViolation("epsilon must be >= 0");
  std::optional<SolutionPoint> best;
  for (const SolutionPoint& p : points) {
    if (p.diverged || !(*ref - p.mta <= eps)) continue;
    if (!best || detail::bda_better(p.bda, best->bda, side) || (p.bda == best->bda && p.mta > best->mta)) best = p;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Adaptive adversaries
// ---------------------------------------------------------------------------

/// (attack, parameter, benign value) -> malicious value.
class GreedyResponseTable {
 public:
  using Key = std::tuple<std::string, std::string, double>;

  void set(std::string attack, std::string param, double benign, double malicious) {
    param_index(param);
    entries_[{std::move(attack), std::move(param), benign}] = malicious;
  }

  std::optional<double> lookup(std::string_view attack, std::string_view param, double benign) const {
    auto it = entries_.find({std::string(attack), std::string(param), benign});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }
  const std::map<Key, double>& entries() const { return entries_; }

  /// Published greedy responses for four attacks (first value where two are given).
  static GreedyResponseTable published() {
    GreedyResponseTable t;
    const std::array<std::string, 4> attacks{"A3FL", "Chameleon", "DarkFed", "FCBA"};
    auto row = [&](const char* param, double benign, std::array<double, 4> mal) {
      for (std::size_t a = 0; a < 4; ++a) t.set(attacks[a], param, benign, mal[a]);
    };
    row("eta", 0.05, {0.1, 0.5, 0.25, 0.1});
    row("eta", 0.1, {0.1, 0.5, 0.2, 0.1});
    row("eta", 0.2, {0.4, 1, 0.4, 0.4});
    row("eta", 0.5, {1, 0.25, 0.5, 0.5});
    row("E", 2, {20, 2, 10, 10});
    row("E", 5, {20, 2, 5, 10});
    row("E", 10, {5, 2, 5, 10});
    row("E", 20, {10, 2, 2, 10});
    row("B", 32, {32, 32, 32, 64});
    row("B", 64, {32, 32, 32, 128});
    row("B", 128, {32, 32, 32, 128});
    row("lambda", 0.0001, {0.001, 0.0005, 0.0001, 0.0001});
    row("lambda", 0.0005, {0.0005, 0.0005, 0.0001, 0.0001});
    row("lambda", 0.001, {0.0001, 0.0001, 0.0001, 0.0001});
    return t;
  }

  /// CSV columns: attack,param,benign_value,malicious_value
  void write_csv(std::ostream& os) const {
    os << "attack,param,benign_value,malicious_value\n";
    for (const auto& [key, mal] : entries_)
      os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << format_double(std::get<2>(key)) << ','
         << format_double(mal) << '\n';
  }

  static GreedyResponseTable read_csv(std::istream& is) {
    GreedyResponseTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (lineno == 1 || line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
      double b = 0, m = 0;
      if (f.size() != 4 || !parse_double(f[2], b) || !parse_double(f[3], m))
        throw ConfigError("malformed response table row", lineno);
      t.set(f[0], f[1], b, m);
    }
    return t;
  }

 private:
  std::map<Key, double> entries_;
};

/// Per-parameter lookup; parameters without an entry copy the benign value
/// and are reported through `fallbacks`.
inline HyperTuple greedy_adapt(const HyperTuple& benign, const GreedyResponseTable& table, std::string_view attack,
                               std::vector<std::string>* fallbacks = nullptr) {
  HyperTuple out = benign;
  for (std::size_t p = 0; p < kNumParams; ++p) {
    if (auto v = table.lookup(attack, kParamNames[p], get_param(benign, p)))
      set_param(out, p, *v);
    else if (fallbacks)
      fallbacks->emplace_back(kParamNames[p]);
  }
  return out;
}

/// Evaluates a (benign, malicious) pair.
using PairEvaluator = std::function<SolutionPoint(const HyperTuple& benign, const HyperTuple& malicious)>;

/// Single-axis sweeps: for each parameter and benign value (others at
/// `benign_base`), the malicious value (others at `malicious_base`) with the
/// highest BDA. Ties keep the earlier candidate; all-diverged leaves no entry.
inline GreedyResponseTable build_response_table(const std::string& attack, const SearchSpace& benign_space,
                                                const SearchSpace& malicious_space, const HyperTuple& benign_base,
                                                const HyperTuple& malicious_base, const PairEvaluator& evaluate) {
  GreedyResponseTable table;
  for (std::size_t p = 0; p < kNumParams; ++p) {
    if (benign_space.domains[p].size() < 2 && malicious_space.domains[p].size() < 2) continue;
    for (double bv : benign_space.domains[p]) {
      HyperTuple b = benign_base;
      set_param(b, p, bv);
      std::optional<std::pair<double, double>> best;  // (bda, malicious value)
      for (double mv : malicious_space.domains[p]) {
        HyperTuple m = malicious_base;
        set_param(m, p, mv);
        SolutionPoint pt;
        try {
          pt = evaluate(b, m);
        } catch (const std::exception&) {
          pt.diverged = true;
        }
        if (pt.diverged || !std::isfinite(pt.bda)) continue;
        if (!best || pt.bda > best->first) best = {pt.bda, mv};
      }
      if (best) table.set(attack, std::string(kParamNames[p]), bv, best->second);
    }
  }
  return table;
}

/// NSGA-II over the malicious space maximizing BDA and MTA. Without a
/// constraint the highest-BDA front point is chosen; with one, constrained_best
/// (adversary side) on the front.
inline std::optional<SolutionPoint> stochastic_adversary(const SearchSpace& malicious_space, const Evaluator& evaluate,
                                                         Nsga2Options opt,
                                                         const std::optional<ConstraintSpec>& constraint = std::nullopt) {
  opt.side = Side::adversary;
  const Nsga2Result res = nsga2(malicious_space, evaluate, opt);
  if (constraint) return constrained_best(res.front, *constraint, Side::adversary);
  ConstraintSpec open;
  open.epsilon_adv = std::numeric_limits<double>::infinity();
  open.mta_clean = 0.0;
  return constrained_best(res.front, open, Side::adversary);
}

/// CSV: omega fields, mta, bda, diverged, on_frontier.
inline void write_points_csv(std::ostream& os, const std::vector<SolutionPoint>& points, Side side = Side::defender) {
  const auto front = detail::frontier_indices(points, side);
  std::vector<bool> on(points.size(), false);
  for (std::size_t i : front) on[i] = true;
  os << "eta,mu,lambda,E,B,mta,bda,diverged,on_frontier\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const SolutionPoint& p = points[i];
    os << format_double(p.omega.eta) << ',' << format_double(p.omega.mu) << ',' << format_double(p.omega.lambda) << ','
       << p.omega.epochs << ',' << p.omega.batch_size << ',';
    if (p.diverged)
      os << "NA,NA,1,";
    else
      os << format_double(p.mta) << ',' << format_double(p.bda) << ",0,";
    os << (on[i] ? 1 : 0) << '\n';
  }
}

}  // namespace fedhp::search

#endif  // FEDHP_SEARCH_HPP
