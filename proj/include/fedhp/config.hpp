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
 *
 * Experiment configuration files.
 *
 * Grammar (UTF-8):
 *
 *   # comment
 *   [section]
 *   key = value
 *
 * Lists are comma separated. Every key is declared once in the knob registry
 * below, which drives parsing, serialization and the completeness check.
 */

#ifndef FEDHP_CONFIG_HPP
#define FEDHP_CONFIG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedhp/analytic.hpp"
#include "fedhp/core.hpp"
#include "fedhp/defense.hpp"
#include "fedhp/engine.hpp"
#include "fedhp/eval.hpp"
#include "fedhp/search.hpp"
#include "fedhp/tensor.hpp"
#include "fedhp/threat.hpp"

namespace fedhp::config {

enum class ExperimentKind { analytic_surface, federation, sweep, frontier, regression };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::analytic_surface: return "analytic_surface";
    case ExperimentKind::federation: return "federation";
    case ExperimentKind::sweep: return "sweep";
    case ExperimentKind::frontier: return "frontier";
    case ExperimentKind::regression: return "regression";
  }
  return "federation";
}

enum class AdversaryKind { fixed, greedy, stochastic };

inline std::string_view to_string(AdversaryKind k) {
  switch (k) {
    case AdversaryKind::fixed: return "fixed";
    case AdversaryKind::greedy: return "greedy";
    case AdversaryKind::stochastic: return "stochastic";
  }
  return "fixed";
}

struct AnalyticBlock {
  std::string axis1 = "eta_b";
  std::vector<double> values1{0.05, 0.1, 0.2, 0.5};
  std::string axis2 = "beta";
  std::vector<double> values2{0.5, 1, 2, 4, 8, 16};
  int rounds = 200;
  double alpha = 0.1;
  std::size_t group_size = 512;
  std::size_t holdout_size = 2048;
  double mixin = 0.9;

  friend bool operator==(const AnalyticBlock&, const AnalyticBlock&) = default;
};

struct AdversaryBlock {
  AdversaryKind kind = AdversaryKind::fixed;
  std::string attack_name = "baseline";
  /// "published" or a CSV path (attack,param,benign_value,malicious_value).
  std::string response_table = "published";

  friend bool operator==(const AdversaryBlock&, const AdversaryBlock&) = default;
};

struct SearchBlock {
  search::SearchSpace benign = search::SearchSpace::frontier_default();
  std::string method = "both";  // grid | nsga2 | both
  int population = 12;
  int generations = 20;
  /// Candidate malicious values (stochastic adversary, response tables).
  search::SearchSpace malicious;
  search::ConstraintSpec constraint;

  friend bool operator==(const SearchBlock& a, const SearchBlock& b) {
    return a.benign == b.benign && a.method == b.method && a.population == b.population &&
           a.generations == b.generations && a.malicious == b.malicious &&
           a.constraint.epsilon_def == b.constraint.epsilon_def && a.constraint.epsilon_adv == b.constraint.epsilon_adv &&
           a.constraint.mta_ideal == b.constraint.mta_ideal && a.constraint.mta_clean == b.constraint.mta_clean;
  }
};

struct SweepBlock {
  search::SearchSpace space;
  int seeds = 1;
  bool build_response_table = false;

  SweepBlock() {
    space.domains = {std::vector<double>{0.05, 0.1, 0.2}, {0.9}, {0.0005}, {2, 5, 10}, {32, 64}};
  }

  friend bool operator==(const SweepBlock&, const SweepBlock&) = default;
};

struct RegressionBlock {
  std::string response = "bda";  // bda | mta | bda_star | mta_star | span

  friend bool operator==(const RegressionBlock&, const RegressionBlock&) = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::federation;
  std::string output_dir = "results";
  std::uint64_t master_seed = 1;
  int threads = 1;

  fl::FederationConfig federation;
  SgdConfig benign;
  threat::AttackConfig attack;
  AdversaryBlock adversary;
  defense::AggregatorSpec defense;
  double span_threshold = 0.5;
  AnalyticBlock analytic;
  SearchBlock search;
  SweepBlock sweep;
  RegressionBlock regression;

  /// Federation settings with the experiment-wide seed and thread count applied.
  fl::FederationConfig federation_config() const {
    fl::FederationConfig f = federation;
    f.master_seed = master_seed;
    f.threads = threads;
    return f;
  }

  eval::MetricConfig metric_config() const { return {span_threshold, federation.attack_end}; }

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.kind == b.kind && a.output_dir == b.output_dir && a.master_seed == b.master_seed &&
           a.threads == b.threads && a.federation == b.federation && a.benign == b.benign && a.attack == b.attack &&
           a.adversary == b.adversary && a.defense == b.defense && a.span_threshold == b.span_threshold &&
           a.analytic == b.analytic && a.search == b.search && a.sweep == b.sweep && a.regression == b.regression;
  }
};

// ---------------------------------------------------------------------------
// Value parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double real(std::string_view key, std::string_view v) {
  double out = 0.0;
  if (!parse_double(v, out) || std::isnan(out)) throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return out;
}

inline long long integer(std::string_view key, std::string_view v) {
  long long out = 0;
  if (!parse_int(v, out)) throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  return out;
}

inline bool boolean(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false");
}

inline std::vector<double> real_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  for (const std::string& item : split(v, ',')) out.push_back(real(key, item));
  if (out.empty()) throw ConfigError(std::string(key) + ": empty list");
  return out;
}

inline void check(bool ok, std::string_view key, const std::string& msg) {
  if (!ok) throw ConfigError(std::string(key) + " " + msg);
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
  return out;
}

inline std::string opt_real(const std::optional<double>& v) { return v ? format_double(*v) : "none"; }

inline std::optional<double> parse_opt_real(std::string_view key, std::string_view v) {
  if (v == "none" || v == "auto") return std::nullopt;
  return real(key, v);
}

inline int positive_int(std::string_view key, std::string_view v, long long lo = 1) {
  const long long x = integer(key, v);
  check(x >= lo && x <= 1'000'000'000, key, "must be an integer >= " + std::to_string(lo));
  return static_cast<int>(x);
}

inline std::vector<double> int_list(std::string_view key, std::string_view v) {
  std::vector<double> out = real_list(key, v);
  for (double x : out) check(x >= 1 && x == std::floor(x), key, "values must be positive integers");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Knob registry
// ---------------------------------------------------------------------------

struct Knob {
  std::string section;
  std::string key;
  std::string help;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

namespace detail {

inline void add_domain_knobs(std::vector<Knob>& reg, const std::string& section, const std::string& prefix,
                             std::function<search::SearchSpace&(ExperimentConfig&)> space,
                             std::function<const search::SearchSpace&(const ExperimentConfig&)> cspace,
                             const std::string& what) {
  static const std::array<std::string, 5> keys{"eta", "mu", "lambda", "epochs", "batch_size"};
  for (std::size_t p = 0; p < 5; ++p) {
    const std::string key = prefix + keys[p];
    reg.push_back({section, key, what + " domain for " + std::string(search::kParamNames[p]),
                   [space, p, key](ExperimentConfig& c, std::string_view v) {
                     std::vector<double> vals = p >= 3 ? int_list(key, v) : real_list(key, v);
                     if (p == 0)
                       for (double x : vals) check(x >= 0, key, "values must be >= 0");
                     if (p == 1)
                       for (double x : vals) check(x >= 0 && x < 1, key, "values must be in [0, 1)");
                     if (p == 2)
                       for (double x : vals) check(x >= 0, key, "values must be >= 0");
                     space(c).domains[p] = std::move(vals);
                   },
                   [cspace, p](const ExperimentConfig& c) { return join(cspace(c).domains[p]); }});
  }
}

}  // namespace detail

/// Every configurable knob, in serialization order.
inline const std::vector<Knob>& registry() {
  static const std::vector<Knob> reg = [] {
    using namespace detail;
    std::vector<Knob> r;
    auto add = [&](std::string s, std::string k, std::string h, auto set, auto get) {
      r.push_back({std::move(s), std::move(k), std::move(h), set, get});
    };

    // [experiment]
    add("experiment", "kind", "analytic_surface | federation | sweep | frontier | regression",
        [](ExperimentConfig& c, std::string_view v) {
          if (v == "analytic_surface") c.kind = ExperimentKind::analytic_surface;
          else if (v == "federation") c.kind = ExperimentKind::federation;
          else if (v == "sweep") c.kind = ExperimentKind::sweep;
          else if (v == "frontier") c.kind = ExperimentKind::frontier;
          else if (v == "regression") c.kind = ExperimentKind::regression;
          else throw ConfigError("kind: unknown experiment kind '" + std::string(v) + "'");
        },
        [](const ExperimentConfig& c) { return std::string(to_string(c.kind)); });
    add("experiment", "output_dir", "directory for artifacts (created if missing)",
        [](ExperimentConfig& c, std::string_view v) {
          check(!v.empty(), "output_dir", "must not be empty");
          c.output_dir = std::string(v);
        },
        [](const ExperimentConfig& c) { return c.output_dir; });
    add("experiment", "master_seed", "seed for every random stream",
        [](ExperimentConfig& c, std::string_view v) {
          std::uint64_t s = 0;
          if (!parse_int(v, s)) throw ConfigError("master_seed: expected a non-negative integer");
          c.master_seed = s;
        },
        [](const ExperimentConfig& c) { return std::to_string(c.master_seed); });
    add("experiment", "threads", "client-training threads, 0 = hardware count (results do not depend on it)",
        [](ExperimentConfig& c, std::string_view v) { c.threads = positive_int("threads", v, 0); },
        [](const ExperimentConfig& c) { return std::to_string(c.threads); });

    // [federation]
    add("federation", "n_clients", "N",
        [](ExperimentConfig& c, std::string_view v) { c.federation.n_clients = positive_int("n_clients", v, 2); },
        [](const ExperimentConfig& c) { return std::to_string(c.federation.n_clients); });
    add("federation", "clients_per_round", "M",
        [](ExperimentConfig& c, std::string_view v) { c.federation.clients_per_round = positive_int("clients_per_round", v); },
        [](const ExperimentConfig& c) { return std::to_string(c.federation.clients_per_round); });
    add("federation", "alpha", "malicious fraction in [0, 0.5]",
        [](ExperimentConfig& c, std::string_view v) {
          const double a = real("alpha", v);
          check(a >= 0 && a <= 0.5, "alpha", "must be in [0, 0.5]");
          c.federation.malicious_fraction = a;
        },
        [](const ExperimentConfig& c) { return format_double(c.federation.malicious_fraction); });
    add("federation", "rounds_total", "number of rounds",
        [](ExperimentConfig& c, std::string_view v) { c.federation.rounds_total = positive_int("rounds_total", v, 0); },
        [](const ExperimentConfig& c) { return std::to_string(c.federation.rounds_total); });
    add("federation", "attack_start", "a_s (first attack round)",
        [](ExperimentConfig& c, std::string_view v) { c.federation.attack_start = positive_int("attack_start", v); },
        [](const ExperimentConfig& c) { return std::to_string(c.federation.attack_start); });
    add("federation", "attack_end", "a_e (last attack round, also t0 for Span)",
        [](ExperimentConfig& c, std::string_view v) { c.federation.attack_end = positive_int("attack_end", v); },
        [](const ExperimentConfig& c) { return std::to_string(c.federation.attack_end); });
    add("federation", "dirichlet_concentration", "non-IID concentration > 0",
        [](ExperimentConfig& c, std::string_view v) {
          const double x = real("dirichlet_concentration", v);
          check(x > 0 && std::isfinite(x), "dirichlet_concentration", "must be > 0");
          c.federation.dirichlet_concentration = x;
        },
        [](const ExperimentConfig& c) { return format_double(c.federation.dirichlet_concentration); });
    add("federation", "lr_decay_gamma", "per-round benign LR decay in [2^(-1/E_b), 1]",
        [](ExperimentConfig& c, std::string_view v) {
          const double x = real("lr_decay_gamma", v);
          check(x > 0 && x <= 1, "lr_decay_gamma", "must be in (0, 1]");
          c.federation.lr_decay_gamma = x;
        },
        [](const ExperimentConfig& c) { return format_double(c.federation.lr_decay_gamma); });
    add("federation", "train_size", "toy-task training samples",
        [](ExperimentConfig& c, std::string_view v) { c.federation.train_size = static_cast<std::size_t>(positive_int("train_size", v)); },
        [](const ExperimentConfig& c) { return std::to_string(c.federation.train_size); });
    add("federation", "test_size", "toy-task evaluation samples",
        [](ExperimentConfig& c, std::string_view v) { c.federation.test_size = static_cast<std::size_t>(positive_int("test_size", v)); },
        [](const ExperimentConfig& c) { return std::to_string(c.federation.test_size); });
    add("federation", "hidden", "MLP hidden widths",
        [](ExperimentConfig& c, std::string_view v) {
          std::vector<std::size_t> h;
          for (double x : int_list("hidden", v)) h.push_back(static_cast<std::size_t>(x));
          c.federation.hidden = std::move(h);
        },
        [](const ExperimentConfig& c) {
          std::vector<double> h(c.federation.hidden.begin(), c.federation.hidden.end());
          return join(h);
        });
    add("federation", "activation", "tanh | relu",
        [](ExperimentConfig& c, std::string_view v) {
          if (v == "tanh") c.federation.activation = Activation::tanh;
          else if (v == "relu") c.federation.activation = Activation::relu;
          else throw ConfigError("activation: expected tanh or relu");
        },
        [](const ExperimentConfig& c) { return std::string(c.federation.activation == Activation::tanh ? "tanh" : "relu"); });

    // [benign]
    add("benign", "eta", "eta_b",
        [](ExperimentConfig& c, std::string_view v) {
          c.benign.eta = real("eta", v);
          check(c.benign.eta >= 0 && std::isfinite(c.benign.eta), "eta", "must be >= 0");
        },
        [](const ExperimentConfig& c) { return format_double(c.benign.eta); });
    add("benign", "mu", "mu_b in [0, 1)",
        [](ExperimentConfig& c, std::string_view v) {
          c.benign.mu = real("mu", v);
          check(c.benign.mu >= 0 && c.benign.mu < 1, "mu", "must be in [0, 1)");
        },
        [](const ExperimentConfig& c) { return format_double(c.benign.mu); });
    add("benign", "lambda", "lambda_b >= 0",
        [](ExperimentConfig& c, std::string_view v) {
          c.benign.lambda = real("lambda", v);
          check(c.benign.lambda >= 0 && std::isfinite(c.benign.lambda), "lambda", "must be >= 0");
        },
        [](const ExperimentConfig& c) { return format_double(c.benign.lambda); });
    add("benign", "epochs", "E_b",
        [](ExperimentConfig& c, std::string_view v) { c.benign.epochs = positive_int("epochs", v); },
        [](const ExperimentConfig& c) { return std::to_string(c.benign.epochs); });
    add("benign", "batch_size", "B_b",
        [](ExperimentConfig& c, std::string_view v) { c.benign.batch_size = positive_int("batch_size", v); },
        [](const ExperimentConfig& c) { return std::to_string(c.benign.batch_size); });

    // [attack]
    add("attack", "trigger", "index:value stamps separated by ';'",
        [](ExperimentConfig& c, std::string_view v) {
          threat::TriggerSpec t;
          t.stamps.clear();
          if (v != "none")
            for (const std::string& item : split(v, ';')) {
              const auto parts = split(item, ':');
              if (parts.size() != 2) throw ConfigError("trigger: expected index:value");
              const long long idx = integer("trigger", parts[0]);
              check(idx >= 0, "trigger", "index must be >= 0");
              t.stamps.emplace_back(static_cast<std::size_t>(idx), real("trigger", parts[1]));
            }
          c.attack.trigger = std::move(t);
        },
        [](const ExperimentConfig& c) {
          if (c.attack.trigger.stamps.empty()) return std::string("none");
          std::string s;
          for (std::size_t i = 0; i < c.attack.trigger.stamps.size(); ++i)
            s += (i ? ";" : "") + std::to_string(c.attack.trigger.stamps[i].first) + ":" +
                 format_double(c.attack.trigger.stamps[i].second);
          return s;
        });
    add("attack", "target_class", "y_t",
        [](ExperimentConfig& c, std::string_view v) {
          const long long y = integer("target_class", v);
          check(y == 0 || y == 1, "target_class", "must be 0 or 1");
          c.attack.target_class = static_cast<int>(y);
        },
        [](const ExperimentConfig& c) { return std::to_string(c.attack.target_class); });
    add("attack", "poison_fraction", "fraction of malicious data stamped and relabelled",
        [](ExperimentConfig& c, std::string_view v) {
          const double x = real("poison_fraction", v);
          check(x >= 0 && x <= 1, "poison_fraction", "must be in [0, 1]");
          c.attack.poison_fraction = x;
        },
        [](const ExperimentConfig& c) { return format_double(c.attack.poison_fraction); });
    add("attack", "beta", "eta_m = beta * eta_b",
        [](ExperimentConfig& c, std::string_view v) {
          const double x = real("beta", v);
          check(x > 0 && std::isfinite(x), "beta", "must be > 0");
          c.attack.beta = x;
        },
        [](const ExperimentConfig& c) { return format_double(c.attack.beta); });
    add("attack", "mu", "mu_m",
        [](ExperimentConfig& c, std::string_view v) {
          const double x = real("mu", v);
          check(x >= 0 && x < 1, "mu", "must be in [0, 1)");
          c.attack.malicious_sgd.mu = x;
        },
        [](const ExperimentConfig& c) { return format_double(c.attack.malicious_sgd.mu); });
    add("attack", "lambda", "lambda_m",
        [](ExperimentConfig& c, std::string_view v) {
          const double x = real("lambda", v);
          check(x >= 0 && std::isfinite(x), "lambda", "must be >= 0");
          c.attack.malicious_sgd.lambda = x;
        },
        [](const ExperimentConfig& c) { return format_double(c.attack.malicious_sgd.lambda); });
    add("attack", "epochs", "E_m",
        [](ExperimentConfig& c, std::string_view v) { c.attack.malicious_sgd.epochs = positive_int("epochs", v); },
        [](const ExperimentConfig& c) { return std::to_string(c.attack.malicious_sgd.epochs); });
    add("attack", "batch_size", "B_m",
        [](ExperimentConfig& c, std::string_view v) { c.attack.malicious_sgd.batch_size = positive_int("batch_size", v); },
        [](const ExperimentConfig& c) { return std::to_string(c.attack.malicious_sgd.batch_size); });
    add("attack", "scaling", "model-replacement factor, or none",
        [](ExperimentConfig& c, std::string_view v) {
          c.attack.scaling = parse_opt_real("scaling", v);
          if (c.attack.scaling) check(*c.attack.scaling > 0, "scaling", "must be > 0");
        },
        [](const ExperimentConfig& c) { return opt_real(c.attack.scaling); });
    add("attack", "exclude_target_in_bda", "drop target-labelled samples from the BDA set",
        [](ExperimentConfig& c, std::string_view v) { c.attack.exclude_target_in_bda = boolean("exclude_target_in_bda", v); },
        [](const ExperimentConfig& c) { return std::string(c.attack.exclude_target_in_bda ? "true" : "false"); });
    add("attack", "adversary", "fixed | greedy | stochastic",
        [](ExperimentConfig& c, std::string_view v) {
          if (v == "fixed") c.adversary.kind = AdversaryKind::fixed;
          else if (v == "greedy") c.adversary.kind = AdversaryKind::greedy;
          else if (v == "stochastic") c.adversary.kind = AdversaryKind::stochastic;
          else throw ConfigError("adversary: expected fixed, greedy or stochastic");
        },
        [](const ExperimentConfig& c) { return std::string(to_string(c.adversary.kind)); });
    add("attack", "attack_name", "row key into the greedy response table",
        [](ExperimentConfig& c, std::string_view v) {
          check(!v.empty(), "attack_name", "must not be empty");
          c.adversary.attack_name = std::string(v);
        },
        [](const ExperimentConfig& c) { return c.adversary.attack_name; });
    add("attack", "response_table", "published, or a CSV path",
        [](ExperimentConfig& c, std::string_view v) {
          check(!v.empty(), "response_table", "must not be empty");
          c.adversary.response_table = std::string(v);
        },
        [](const ExperimentConfig& c) { return c.adversary.response_table; });

    // [defense]
    add("defense", "aggregator", "none | krum | multikrum | bulyan | foolsgold",
        [](ExperimentConfig& c, std::string_view v) { c.defense.kind = defense::parse_aggregator(v); },
        [](const ExperimentConfig& c) { return std::string(defense::to_string(c.defense.kind)); });
    add("defense", "f", "assumed attacker count for Krum-family rules",
        [](ExperimentConfig& c, std::string_view v) { c.defense.f = positive_int("f", v, 0); },
        [](const ExperimentConfig& c) { return std::to_string(c.defense.f); });
    add("defense", "m", "Multi-Krum selection size, or auto (= updates - f)",
        [](ExperimentConfig& c, std::string_view v) {
          if (v == "auto") c.defense.m.reset();
          else c.defense.m = positive_int("m", v);
        },
        [](const ExperimentConfig& c) { return c.defense.m ? std::to_string(*c.defense.m) : std::string("auto"); });

    // [metrics]
    add("metrics", "span_threshold", "gamma for Span_gamma, in [0, 1]",
        [](ExperimentConfig& c, std::string_view v) {
          const double x = real("span_threshold", v);
          check(x >= 0 && x <= 1, "span_threshold", "must be in [0, 1]");
          c.span_threshold = x;
        },
        [](const ExperimentConfig& c) { return format_double(c.span_threshold); });

    // [analytic]
    add("analytic", "axis1", "surface row axis",
        [](ExperimentConfig& c, std::string_view v) {
          check(analytic::is_surface_axis(v), "axis1", "must be one of eta_b beta mu_b mu_m lambda_b lambda_m E_b E_m B_b B_m");
          c.analytic.axis1 = std::string(v);
        },
        [](const ExperimentConfig& c) { return c.analytic.axis1; });
    add("analytic", "values1", "row axis values",
        [](ExperimentConfig& c, std::string_view v) { c.analytic.values1 = real_list("values1", v); },
        [](const ExperimentConfig& c) { return join(c.analytic.values1); });
    add("analytic", "axis2", "surface column axis",
        [](ExperimentConfig& c, std::string_view v) {
          check(analytic::is_surface_axis(v), "axis2", "must be one of eta_b beta mu_b mu_m lambda_b lambda_m E_b E_m B_b B_m");
          c.analytic.axis2 = std::string(v);
        },
        [](const ExperimentConfig& c) { return c.analytic.axis2; });
    add("analytic", "values2", "column axis values",
        [](ExperimentConfig& c, std::string_view v) { c.analytic.values2 = real_list("values2", v); },
        [](const ExperimentConfig& c) { return join(c.analytic.values2); });
    add("analytic", "rounds", "two-group rounds averaged per cell",
        [](ExperimentConfig& c, std::string_view v) { c.analytic.rounds = positive_int("rounds", v); },
        [](const ExperimentConfig& c) { return std::to_string(c.analytic.rounds); });
    add("analytic", "alpha", "malicious group weight in [0, 0.5]",
        [](ExperimentConfig& c, std::string_view v) {
          const double a = real("alpha", v);
          check(a >= 0 && a <= 0.5, "alpha", "must be in [0, 0.5]");
          c.analytic.alpha = a;
        },
        [](const ExperimentConfig& c) { return format_double(c.analytic.alpha); });
    add("analytic", "group_size", "samples per group objective",
        [](ExperimentConfig& c, std::string_view v) { c.analytic.group_size = static_cast<std::size_t>(positive_int("group_size", v)); },
        [](const ExperimentConfig& c) { return std::to_string(c.analytic.group_size); });
    add("analytic", "holdout_size", "backdoor holdout samples scoring F_m",
        [](ExperimentConfig& c, std::string_view v) { c.analytic.holdout_size = static_cast<std::size_t>(positive_int("holdout_size", v)); },
        [](const ExperimentConfig& c) { return std::to_string(c.analytic.holdout_size); });
    add("analytic", "mixin", "clean fraction of the malicious group's data",
        [](ExperimentConfig& c, std::string_view v) {
          const double x = real("mixin", v);
          check(x >= 0 && x <= 1, "mixin", "must be in [0, 1]");
          c.analytic.mixin = x;
        },
        [](const ExperimentConfig& c) { return format_double(c.analytic.mixin); });

    // [search]
    add_domain_knobs(r, "search", "", [](ExperimentConfig& c) -> search::SearchSpace& { return c.search.benign; },
                     [](const ExperimentConfig& c) -> const search::SearchSpace& { return c.search.benign; }, "benign");
    add_domain_knobs(r, "search", "mal_",
                     [](ExperimentConfig& c) -> search::SearchSpace& { return c.search.malicious; },
                     [](const ExperimentConfig& c) -> const search::SearchSpace& { return c.search.malicious; },
                     "malicious (absolute eta_m)");
    add("search", "method", "grid | nsga2 | both",
        [](ExperimentConfig& c, std::string_view v) {
          check(v == "grid" || v == "nsga2" || v == "both", "method", "must be grid, nsga2 or both");
          c.search.method = std::string(v);
        },
        [](const ExperimentConfig& c) { return c.search.method; });
    add("search", "population", "NSGA-II population (even, >= 4)",
        [](ExperimentConfig& c, std::string_view v) {
          c.search.population = positive_int("population", v, 4);
          check(c.search.population % 2 == 0, "population", "must be even");
        },
        [](const ExperimentConfig& c) { return std::to_string(c.search.population); });
    add("search", "generations", "NSGA-II generations",
        [](ExperimentConfig& c, std::string_view v) { c.search.generations = positive_int("generations", v, 0); },
        [](const ExperimentConfig& c) { return std::to_string(c.search.generations); });
    add("search", "epsilon_def", "defender MTA slack",
        [](ExperimentConfig& c, std::string_view v) {
          c.search.constraint.epsilon_def = real("epsilon_def", v);
          check(c.search.constraint.epsilon_def >= 0, "epsilon_def", "must be >= 0");
        },
        [](const ExperimentConfig& c) { return format_double(c.search.constraint.epsilon_def); });
    add("search", "epsilon_adv", "adversary MTA slack",
        [](ExperimentConfig& c, std::string_view v) {
          c.search.constraint.epsilon_adv = real("epsilon_adv", v);
          check(c.search.constraint.epsilon_adv >= 0, "epsilon_adv", "must be >= 0");
        },
        [](const ExperimentConfig& c) { return format_double(c.search.constraint.epsilon_adv); });
    add("search", "mta_ideal", "defender reference MTA, or none",
        [](ExperimentConfig& c, std::string_view v) { c.search.constraint.mta_ideal = parse_opt_real("mta_ideal", v); },
        [](const ExperimentConfig& c) { return opt_real(c.search.constraint.mta_ideal); });
    add("search", "mta_clean", "adversary reference MTA, or none",
        [](ExperimentConfig& c, std::string_view v) { c.search.constraint.mta_clean = parse_opt_real("mta_clean", v); },
        [](const ExperimentConfig& c) { return opt_real(c.search.constraint.mta_clean); });

    // [sweep]
    add_domain_knobs(r, "sweep", "", [](ExperimentConfig& c) -> search::SearchSpace& { return c.sweep.space; },
                     [](const ExperimentConfig& c) -> const search::SearchSpace& { return c.sweep.space; }, "benign");
    add("sweep", "seeds", "federation seeds per sweep point",
        [](ExperimentConfig& c, std::string_view v) { c.sweep.seeds = positive_int("seeds", v); },
        [](const ExperimentConfig& c) { return std::to_string(c.sweep.seeds); });
    add("sweep", "build_response_table", "derive a greedy response table against [search] mal_* values",
        [](ExperimentConfig& c, std::string_view v) { c.sweep.build_response_table = boolean("build_response_table", v); },
        [](const ExperimentConfig& c) { return std::string(c.sweep.build_response_table ? "true" : "false"); });

    // [regression]
    add("regression", "response", "bda | mta | bda_star | mta_star | span",
        [](ExperimentConfig& c, std::string_view v) {
          check(v == "bda" || v == "mta" || v == "bda_star" || v == "mta_star" || v == "span", "response",
                "must be bda, mta, bda_star, mta_star or span");
          c.regression.response = std::string(v);
        },
        [](const ExperimentConfig& c) { return c.regression.response; });
    return r;
  }();
  return reg;
}

inline const Knob* find_knob(std::string_view section, std::string_view key) {
  for (const Knob& k : registry())
    if (k.section == section && k.key == key) return &k;
  return nullptr;
}

inline std::vector<std::string> sections() {
  std::vector<std::string> out;
  for (const Knob& k : registry())
    if (std::find(out.begin(), out.end(), k.section) == out.end()) out.push_back(k.section);
  return out;
}

// ---------------------------------------------------------------------------
// Load / validate / serialize
// ---------------------------------------------------------------------------

/// Line of each "section.key" seen while parsing, for cross-field errors.
using LineMap = std::map<std::string, std::size_t>;

/// Cross-field invariants. Errors point at the line of the offending key when known.
inline void validate(const ExperimentConfig& c, const LineMap& lines = {}) {
  auto fail = [&](const std::string& key, const std::string& msg) {
    auto it = lines.find(key);
    throw ConfigError(key + ": " + msg, it == lines.end() ? 0 : it->second);
  };
  const fl::FederationConfig& f = c.federation;
  if (f.clients_per_round > f.n_clients) fail("federation.clients_per_round", "must be <= n_clients");
  if (f.attack_start > f.attack_end) fail("federation.attack_end", "must be >= attack_start");
  if (f.train_size < static_cast<std::size_t>(f.n_clients)) fail("federation.train_size", "must be >= n_clients");
  const double floor_gamma = std::pow(2.0, -1.0 / c.benign.epochs);
  if (f.lr_decay_gamma < floor_gamma)
    fail("federation.lr_decay_gamma", "must be >= 2^(-1/E_b) = " + format_double(floor_gamma));
  if (static_cast<std::size_t>(f.clients_per_round) < fl::min_updates(c.defense))
    fail("defense.aggregator", std::string(defense::to_string(c.defense.kind)) + " with f = " + std::to_string(c.defense.f) +
                                   " needs clients_per_round >= " + std::to_string(fl::min_updates(c.defense)));
  if (c.defense.m && *c.defense.m > f.clients_per_round) fail("defense.m", "must be <= clients_per_round");
  for (const auto& [index, value] : c.attack.trigger.stamps) {
    (void)value;
    if (index >= 2) fail("attack.trigger", "index must be 0 or 1 for the 2D task");
  }
  if (c.analytic.values1.empty() || c.analytic.values2.empty()) fail("analytic.values1", "axes need values");
  try {
    analytic::GroupHyper h = analytic::default_group_hyper();
    for (double v : c.analytic.values1) analytic::set_axis(h, c.analytic.axis1, v);
    for (double v : c.analytic.values2) analytic::set_axis(h, c.analytic.axis2, v);
  } catch (const ConfigError& e) {
    fail("analytic.values1", e.what());
  }
  if (c.kind == ExperimentKind::frontier || c.kind == ExperimentKind::sweep || c.kind == ExperimentKind::regression) {
    const search::SearchSpace& s = c.kind == ExperimentKind::frontier ? c.search.benign : c.sweep.space;
    for (double e : s.domains[3])
      if (f.lr_decay_gamma < std::pow(2.0, -1.0 / e))
        fail("federation.lr_decay_gamma", "violates 2^(-1/E_b) for searched E_b = " + format_double(e));
  }
}

inline ExperimentConfig parse(std::istream& in, LineMap* lines_out = nullptr) {
  ExperimentConfig cfg;
  LineMap lines;
  std::set<std::string> seen_sections;
  std::string section;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (lineno == 1 && raw.rfind("\xEF\xBB\xBF", 0) == 0) raw.erase(0, 3);
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", lineno);
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      const auto known = sections();
      if (std::find(known.begin(), known.end(), section) == known.end())
        throw ConfigError("unknown section [" + section + "]", lineno);
      if (!seen_sections.insert(section).second) throw ConfigError("duplicate section [" + section + "]", lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", lineno);
    if (section.empty()) throw ConfigError("key outside any [section]", lineno);
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    const Knob* knob = find_knob(section, key);
    if (!knob) throw ConfigError("unknown key '" + key + "' in [" + section + "]", lineno);
    const std::string full = section + "." + key;
    if (lines.count(full)) throw ConfigError("duplicate key '" + key + "'", lineno);
    try {
      knob->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), lineno);
    }
    lines[full] = lineno;
  }
  if (!seen_sections.count("experiment")) throw ConfigError("missing required [experiment] block");
  if (!lines.count("experiment.kind")) throw ConfigError("missing required key kind in [experiment]");
  validate(cfg, lines);
  if (lines_out) *lines_out = std::move(lines);
  return cfg;
}

inline ExperimentConfig parse_string(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  return parse(in);
}

/// Canonical text listing every knob; parse(serialize(c)) == c.
inline std::string serialize(const ExperimentConfig& c) {
  std::ostringstream os;
  std::string current;
  for (const Knob& k : registry()) {
    if (k.section != current) {
      os << (current.empty() ? "" : "\n") << '[' << k.section << "]\n";
      current = k.section;
    }
    os << k.key << " = " << k.get(c) << '\n';
  }
  return os.str();
}

}  // namespace fedhp::config

#endif  // FEDHP_CONFIG_HPP
