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

// Dirty-label trigger backdoor and the malicious client's training routine.

#ifndef FEDHP_THREAT_HPP
#define FEDHP_THREAT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fedhp/core.hpp"
#include "fedhp/tensor.hpp"

namespace fedhp::threat {

/// Sparse (index, value) stamps. Set-to semantics make stamping idempotent.
/// The default puts x1 at 2.0, outside the clean input range [-1, 1].
struct TriggerSpec {
  std::vector<std::pair<std::size_t, double>> stamps{{0, 2.0}};

  friend bool operator==(const TriggerSpec&, const TriggerSpec&) = default;
};

struct AttackConfig {
  TriggerSpec trigger;
  int target_class = 1;
  double poison_fraction = 0.5;
  /// eta_m = beta * eta_b(t); malicious_sgd.eta is overwritten each round.
  double beta = 1.0;
  SgdConfig malicious_sgd;
  std::optional<double> scaling;
  /// Drop samples whose clean label already equals the target from the BDA set.
  bool exclude_target_in_bda = false;

  void validate() const {
    if (target_class != 0 && target_class != 1) throw ConfigError("target_class must be 0 or 1");
    if (!(poison_fraction >= 0.0 && poison_fraction <= 1.0)) throw ConfigError("poison_fraction must be in [0, 1]");
    if (!(std::isfinite(beta) && beta > 0.0)) throw ConfigError("beta must be > 0");
    if (scaling && !(std::isfinite(*scaling) && *scaling > 0.0)) throw ConfigError("scaling must be > 0");
    SgdConfig probe = malicious_sgd;
    probe.eta = 0.0;
    probe.validate();
  }

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

/// Stamped copy of `input`.
inline std::vector<double> apply_trigger(std::span<const double> input, const TriggerSpec& trigger) {
  std::vector<double> out(input.begin(), input.end());
  for (const auto& [index, value] : trigger.stamps) {
    if (index >= out.size()) throw ContractViolation("trigger index outside input");
    out[index] = value;
  }
  return out;
}

/// Stamps and relabels floor(fraction * n) uniformly chosen samples.
inline Dataset poison_dataset(const Dataset& dataset, const AttackConfig& attack, Rng& rng) {
  Dataset out = dataset;
  const auto count = static_cast<std::size_t>(std::floor(attack.poison_fraction * static_cast<double>(out.size())));
  if (count == 0) return out;
  std::vector<std::size_t> idx(out.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `count` entries are a uniform subset.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  for (std::size_t i = 0; i < count; ++i) {
    Sample& s = out[idx[i]];
    s.x = apply_trigger(s.x, attack.trigger);
    s.label = attack.target_class;
  }
  return out;
}

/// Triggered copies of a clean evaluation set, labelled with the target.
inline Dataset backdoor_set(const Dataset& clean, const AttackConfig& attack) {
  Dataset out;
  out.reserve(clean.size());
  for (const Sample& s : clean) {
    if (attack.exclude_target_in_bda && s.label == attack.target_class) continue;
    out.push_back({apply_trigger(s.x, attack.trigger), attack.target_class});
  }
  return out;
}

/// Largest usable batch for a client of `n` samples. Small non-IID shards
/// would otherwise run zero steps.
inline SgdConfig fit_batch(SgdConfig cfg, std::size_t n) {
  if (n > 0 && static_cast<std::size_t>(cfg.batch_size) > n) cfg.batch_size = static_cast<int>(n);
  return cfg;
}

struct MaliciousUpdate {
  ParamVector delta;
  double eta_m = 0.0;
};

/// Poisoned local training with eta_m = beta * benign_eta_t, optionally scaled
/// by scaling / active_malicious_count (model replacement).
inline MaliciousUpdate malicious_update(const Model& global, const Dataset& client_data, const AttackConfig& attack,
                                        double benign_eta_t, int active_malicious_count, Rng& poison_rng,
                                        Rng& train_rng) {
  if (active_malicious_count < 1) throw ContractViolation("active_malicious_count must be >= 1");
  SgdConfig cfg = fit_batch(attack.malicious_sgd, client_data.size());
  cfg.eta = attack.beta * benign_eta_t;
  const Dataset poisoned = poison_dataset(client_data, attack, poison_rng);
  MaliciousUpdate out{local_train(global, poisoned, cfg, train_rng), cfg.eta};
  if (attack.scaling) out.delta *= *attack.scaling / static_cast<double>(active_malicious_count);
  return out;
}

}  // namespace fedhp::threat

#endif  // FEDHP_THREAT_HPP
