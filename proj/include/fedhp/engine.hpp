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

// Synchronous federated training: partitioning, client selection, the LR
// schedule, per-client local training and aggregation.

#ifndef FEDHP_ENGINE_HPP
#define FEDHP_ENGINE_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "fedhp/analytic.hpp"
#include "fedhp/core.hpp"
#include "fedhp/defense.hpp"
#include "fedhp/eval.hpp"
#include "fedhp/tensor.hpp"
#include "fedhp/threat.hpp"

namespace fedhp::fl {

struct FederationConfig {
  int n_clients = 20;
  int clients_per_round = 5;
  double malicious_fraction = 0.2;
  int rounds_total = 400;
  int attack_start = 101;
  int attack_end = 200;
  double dirichlet_concentration = 0.9;
  double lr_decay_gamma = 0.999;
  std::uint64_t master_seed = 1;
  // Toy task and model.
  std::size_t train_size = 6000;
  std::size_t test_size = 2000;
  std::vector<std::size_t> hidden{16, 16};
  Activation activation = Activation::tanh;
  /// Worker threads for client training; 0 picks the hardware count. Results
  /// do not depend on it.
  int threads = 0;

  int malicious_count() const {
    return static_cast<int>(std::floor(malicious_fraction * static_cast<double>(n_clients)));
  }

  bool in_window(int t) const { return t >= attack_start && t <= attack_end; }

  void validate(const SgdConfig& benign) const {
    if (n_clients < 2) throw ConfigError("n_clients must be >= 2");
    if (clients_per_round < 1 || clients_per_round > n_clients)
      throw ConfigError("clients_per_round must be in [1, n_clients]");
    if (!(malicious_fraction >= 0.0 && malicious_fraction <= 0.5))
      throw ConfigError("malicious_fraction must be in [0, 0.5]");
    if (rounds_total < 0) throw ConfigError("rounds_total must be >= 0");
    if (attack_start < 1 || attack_start > attack_end) throw ConfigError("attack window needs 1 <= attack_start <= attack_end");
    if (!(dirichlet_concentration > 0.0 && std::isfinite(dirichlet_concentration)))
      throw ConfigError("dirichlet_concentration must be > 0");
    const double floor_gamma = std::pow(2.0, -1.0 / static_cast<double>(benign.epochs));
    if (!(lr_decay_gamma >= floor_gamma && lr_decay_gamma <= 1.0))
      throw ConfigError("lr_decay_gamma must be in [2^(-1/E_b), 1] = [" + format_double(floor_gamma) + ", 1]");
    if (train_size < static_cast<std::size_t>(n_clients)) throw ConfigError("train_size must be >= n_clients");
    if (test_size < 1) throw ConfigError("test_size must be >= 1");
    for (std::size_t h : hidden)
      if (h == 0) throw ConfigError("hidden layer widths must be positive");
    if (threads < 0) throw ConfigError("threads must be >= 0");
  }

  friend bool operator==(const FederationConfig&, const FederationConfig&) = default;
};

struct ClientRecord {
  int id = 0;
  Dataset data;
  bool is_malicious = false;

  std::size_t n_k() const { return data.size(); }
};

// ---------------------------------------------------------------------------
// Partitioning, selection, schedule
// ---------------------------------------------------------------------------

/// Per class, proportions p ~ Dir(concentration * 1_N) split that class's
/// samples by cumulative proportion. Redraws when a client ends up empty.
inline std::vector<Dataset> dirichlet_partition(const Dataset& dataset, int n_clients, double concentration, Rng& rng) {
  if (n_clients < 1) throw ContractViolation("dirichlet_partition needs n_clients >= 1");
  if (dataset.size() < static_cast<std::size_t>(n_clients)) throw ContractViolation("fewer samples than clients");
  if (!(concentration > 0.0)) throw ContractViolation("concentration must be > 0");
  const auto n = static_cast<std::size_t>(n_clients);

  std::vector<std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto c = static_cast<std::size_t>(dataset[i].label);
    if (by_class.size() <= c) by_class.resize(c + 1);
    by_class[c].push_back(i);
  }
  for (const auto& members : by_class)
    if (members.empty()) throw ContractViolation("every class must be present");

  std::gamma_distribution<double> gamma(concentration, 1.0);
  for (int attempt = 0; attempt <= 10; ++attempt) {
    std::vector<std::vector<std::size_t>> assigned(n);
    for (const auto& members : by_class) {
      std::vector<double> p(n);
      double total = 0.0;
      for (double& v : p) total += (v = gamma(rng));
      if (!(total > 0.0)) {
        // Extremely small concentrations can underflow every draw.
        std::uniform_int_distribution<std::size_t> one(0, n - 1);
        std::fill(p.begin(), p.end(), 0.0);
        p[one(rng)] = total = 1.0;
      }
      double cum = 0.0;
      std::size_t start = 0;
      for (std::size_t k = 0; k < n; ++k) {
        cum += p[k] / total;
        std::size_t end = k + 1 == n ? members.size()
                                     : std::min(members.size(), static_cast<std::size_t>(std::llround(
                                                                    cum * static_cast<double>(members.size()))));
        end = std::max(end, start);
        for (std::size_t i = start; i < end; ++i) assigned[k].push_back(members[i]);
        start = end;
      }
    }
    if (std::all_of(assigned.begin(), assigned.end(), [](const auto& a) { return !a.empty(); })) {
      std::vector<Dataset> out(n);
      for (std::size_t k = 0; k < n; ++k) {
        std::sort(assigned[k].begin(), assigned[k].end());
        for (std::size_t i : assigned[k]) out[k].push_back(dataset[i]);
      }
      return out;
    }
  }
  throw ConfigError("dirichlet_partition left a client empty after 10 redraws; raise the concentration or train_size");
}

/// eta0 * gamma^t
inline double lr_at_round(double eta0, double gamma, int t) {
  if (t < 0) throw ContractViolation("lr_at_round needs t >= 0");
  return eta0 * std::pow(gamma, static_cast<double>(t));
}

/// Sorted ids of a uniform m-subset; depends only on (seed, round).
inline std::vector<int> select_clients(int n_clients, int m, int round, std::uint64_t master_seed) {
  if (m < 0 || m > n_clients) throw ContractViolation("select_clients needs 0 <= m <= n_clients");
  Rng rng = make_rng(master_seed, {stream_tag("fl/select"), static_cast<std::uint64_t>(round)});
  std::vector<int> ids(static_cast<std::size_t>(n_clients));
  for (int i = 0; i < n_clients; ++i) ids[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, n_clients - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(rng))]);
  }
  ids.resize(static_cast<std::size_t>(m));
  std::sort(ids.begin(), ids.end());
  return ids;
}

/// The statically corrupted client ids, fixed before round 1.
inline std::vector<int> choose_malicious(int n_clients, int count, std::uint64_t master_seed) {
  Rng rng = make_rng(master_seed, {stream_tag("fl/malicious")});
  std::vector<int> ids(static_cast<std::size_t>(n_clients));
  for (int i = 0; i < n_clients; ++i) ids[static_cast<std::size_t>(i)] = i;
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(std::clamp(count, 0, n_clients)));
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline Rng client_rng(std::uint64_t master_seed, int client_id, int round) {
  return make_rng(master_seed, {stream_tag("fl/client"), static_cast<std::uint64_t>(client_id),
                                static_cast<std::uint64_t>(round)});
}

inline Rng poison_rng(std::uint64_t master_seed, int client_id, int round) {
  return make_rng(master_seed, {stream_tag("fl/poison"), static_cast<std::uint64_t>(client_id),
                                static_cast<std::uint64_t>(round)});
}

/// Minimum update count the aggregation rule accepts.
inline std::size_t min_updates(const defense::AggregatorSpec& spec) {
  const auto f = static_cast<std::size_t>(std::max(spec.f, 0));
  switch (spec.kind) {
    case defense::AggregatorKind::krum:
    case defense::AggregatorKind::multikrum: return 2 * f + 3;
    case defense::AggregatorKind::bulyan: return 4 * f + 3;
    default: return 1;
  }
}

// ---------------------------------------------------------------------------
// Rounds
// ---------------------------------------------------------------------------

struct RoundLog {
  int round = 0;
  double mta = 0.0;
  double bda = 0.0;
  std::vector<int> selected;
  std::vector<int> diverged;
  /// No aggregation happened (every update diverged, or too few survived).
  bool noop = false;
  double benign_eta = 0.0;
  /// Effective malicious LR this round; 0 when no attacker trained.
  double malicious_eta = 0.0;
};

/// Everything a round needs besides the global model and aggregator state.
struct Federation {
  FederationConfig cfg;
  SgdConfig benign;
  threat::AttackConfig attack;
  std::vector<ClientRecord> clients;
  Dataset test_set;
  Dataset backdoor_set;
};

/// Builds the toy-task federation: data, partition and corrupted pool.
inline Federation make_federation(const FederationConfig& cfg, const SgdConfig& benign,
                                  const threat::AttackConfig& attack) {
  cfg.validate(benign);
  benign.validate();
  attack.validate();
  Federation fed{cfg, benign, attack, {}, {}, {}};
  Rng train_rng = make_rng(cfg.master_seed, {stream_tag("fl/train")});
  Rng test_rng = make_rng(cfg.master_seed, {stream_tag("fl/test")});
  Rng part_rng = make_rng(cfg.master_seed, {stream_tag("fl/partition")});
  const Dataset train = analytic::gen_main_dataset(cfg.train_size, train_rng);
  fed.test_set = analytic::gen_main_dataset(cfg.test_size, test_rng);
  fed.backdoor_set = threat::backdoor_set(fed.test_set, attack);
  if (fed.backdoor_set.empty()) throw ConfigError("backdoor evaluation set is empty");

  const std::vector<Dataset> parts = dirichlet_partition(train, cfg.n_clients, cfg.dirichlet_concentration, part_rng);
  const std::vector<int> bad = choose_malicious(cfg.n_clients, cfg.malicious_count(), cfg.master_seed);
  for (int id = 0; id < cfg.n_clients; ++id) {
    const bool mal = std::binary_search(bad.begin(), bad.end(), id);
    fed.clients.push_back({id, parts[static_cast<std::size_t>(id)], mal});
  }
  return fed;
}

inline Model initial_model(const FederationConfig& cfg) {
  std::vector<std::size_t> layers{2};
  layers.insert(layers.end(), cfg.hidden.begin(), cfg.hidden.end());
  layers.push_back(1);
  Rng rng = make_rng(cfg.master_seed, {stream_tag("fl/init")});
  return Model::mlp(std::move(layers), cfg.activation, rng);
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// One round t (1-indexed). Updates `global` in place and returns the log
/// entry with metrics of the new model. Round t trains with eta_b(t-1).
inline RoundLog run_round(Model& global, const Federation& fed, defense::Aggregator& aggregator, int t) {
  const FederationConfig& cfg = fed.cfg;
  if (t < 1) throw ContractViolation("rounds are 1-indexed");

  RoundLog log;
  log.round = t;
  log.selected = select_clients(cfg.n_clients, cfg.clients_per_round, t, cfg.master_seed);
  log.benign_eta = lr_at_round(fed.benign.eta, cfg.lr_decay_gamma, t - 1);

  const bool attacking = cfg.in_window(t);
  int active = 0;
  for (int id : log.selected) active += attacking && fed.clients[static_cast<std::size_t>(id)].is_malicious;

  struct Slot {
    std::optional<ParamVector> delta;
    double eta_m = 0.0;
  };
  std::vector<Slot> slots(log.selected.size());
  detail::parallel_for(log.selected.size(), cfg.threads, [&](std::size_t k) {
    const ClientRecord& c = fed.clients[static_cast<std::size_t>(log.selected[k])];
    Rng rng = client_rng(cfg.master_seed, c.id, t);
    try {
      if (attacking && c.is_malicious) {
        Rng prng = poison_rng(cfg.master_seed, c.id, t);
        auto mu = threat::malicious_update(global, c.data, fed.attack, log.benign_eta, active, prng, rng);
        slots[k].eta_m = mu.eta_m;
        slots[k].delta = std::move(mu.delta);
      } else {
        SgdConfig sgd = threat::fit_batch(fed.benign, c.n_k());
        sgd.eta = log.benign_eta;
        slots[k].delta = local_train(global, c.data, sgd, rng);
      }
    } catch (const DivergenceError&) {
      slots[k].delta.reset();
    }
  });

  std::vector<defense::Update> updates;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const ClientRecord& c = fed.clients[static_cast<std::size_t>(log.selected[k])];
    if (slots[k].delta && slots[k].delta->all_finite()) {
      updates.push_back({c.id, std::move(*slots[k].delta), c.n_k()});
      log.malicious_eta = std::max(log.malicious_eta, slots[k].eta_m);
    } else {
      log.diverged.push_back(c.id);
    }
  }

  if (updates.empty() || updates.size() < min_updates(aggregator.spec())) {
    log.noop = true;
  } else {
    ParamVector next = global.params();
    next += aggregator.aggregate(updates);
    if (next.all_finite())
      global.set_params(std::move(next));
    else
      log.noop = true;
  }
  log.mta = eval::mta(global, fed.test_set);
  log.bda = eval::bda(global, fed.backdoor_set, fed.attack.target_class);
  return log;
}

struct FederationResult {
  std::vector<RoundLog> logs;
  Model initial;
  Model final_model;
};

inline FederationResult run_federation(const FederationConfig& cfg, const SgdConfig& benign,
                                       const threat::AttackConfig& attack, const defense::AggregatorSpec& agg) {
  const Federation fed = make_federation(cfg, benign, attack);
  if (static_cast<std::size_t>(cfg.clients_per_round) < min_updates(agg))
    throw ConfigError("clients_per_round = " + std::to_string(cfg.clients_per_round) + " is below the " +
                      std::string(defense::to_string(agg.kind)) + " bound of " + std::to_string(min_updates(agg)) +
                      " updates");
  defense::Aggregator aggregator(agg);
  FederationResult out{{}, initial_model(cfg), initial_model(cfg)};
  for (int t = 1; t <= cfg.rounds_total; ++t) out.logs.push_back(run_round(out.final_model, fed, aggregator, t));
  return out;
}

inline std::vector<eval::RoundPoint> to_points(const std::vector<RoundLog>& logs) {
  std::vector<eval::RoundPoint> out;
  out.reserve(logs.size());
  for (const RoundLog& l : logs) out.push_back({l.round, l.mta, l.bda});
  return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline void write_round_csv(std::ostream& os, const std::vector<RoundLog>& logs) {
  os << "round,mta,bda,selected_ids,n_diverged\n";
  for (const RoundLog& l : logs) {
    os << l.round << ',' << format_double(l.mta) << ',' << format_double(l.bda) << ',';
    for (std::size_t i = 0; i < l.selected.size(); ++i) os << (i ? ";" : "") << l.selected[i];
    os << ',' << l.diverged.size() << '\n';
  }
}

inline constexpr char kCheckpointMagic[4] = {'F', 'H', 'P', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_le(std::ostream& os, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw IoError("truncated checkpoint");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace detail

/// 16-byte header (magic, uint32 version, uint64 length) then float64 values,
/// all little-endian.
inline void write_checkpoint(const std::string& path, const ParamVector& theta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 4);
  detail::put_le(os, kCheckpointVersion, 4);
  detail::put_le(os, theta.size(), 8);
  for (double v : theta) detail::put_le(os, std::bit_cast<std::uint64_t>(v), 8);
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

inline ParamVector read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kCheckpointMagic)) throw IoError("bad checkpoint magic");
  if (detail::get_le(is, 4) != kCheckpointVersion) throw IoError("unsupported checkpoint version");
  const std::uint64_t n = detail::get_le(is, 8);
  ParamVector out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < n; ++i) out[i] = std::bit_cast<double>(detail::get_le(is, 8));
  return out;
}

}  // namespace fedhp::fl

#endif  // FEDHP_ENGINE_HPP
