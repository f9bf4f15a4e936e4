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

// Server-side aggregation rules. Every rule consumes client deltas and returns
// the aggregated delta that the server adds to the global model.

#ifndef FEDHP_DEFENSE_HPP
#define FEDHP_DEFENSE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedhp/core.hpp"
#include "fedhp/tensor.hpp"

namespace fedhp::defense {

struct Update {
  int client_id = 0;
  ParamVector delta;
  std::size_t n_k = 1;
};

namespace detail {

inline void check_updates(const std::vector<Update>& updates) {
  if (updates.empty()) throw ContractViolation("aggregation needs at least one update");
  const std::size_t d = updates.front().delta.size();
  for (const Update& u : updates) {
    if (u.delta.size() != d) throw ContractViolation("update dimensions differ");
    if (!u.delta.all_finite()) throw ContractViolation("update delta must be finite");
  }
}

/// Indices sorted by client id, used to make every rule order independent.
inline std::vector<std::size_t> by_client_id(const std::vector<Update>& updates) {
  std::vector<std::size_t> idx(updates.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return updates[a].client_id < updates[b].client_id; });
  return idx;
}

inline ParamVector mean_of(const std::vector<Update>& updates, const std::vector<std::size_t>& chosen) {
  ParamVector out(updates.front().delta.size());
  for (std::size_t i : chosen) out += updates[i].delta;
  for (double& v : out) v /= static_cast<double>(chosen.size());
  return out;
}

/// Krum score: sum of squared distances to the `neighbors` closest other updates.
inline std::vector<double> krum_scores(const std::vector<Update>& updates, const std::vector<std::size_t>& pool,
                                       std::size_t neighbors) {
  std::vector<double> scores(pool.size(), 0.0);
  std::vector<double> dists;
  for (std::size_t a = 0; a < pool.size(); ++a) {
    dists.clear();
    for (std::size_t b = 0; b < pool.size(); ++b)
      if (a != b) dists.push_back(squared_distance(updates[pool[a]].delta, updates[pool[b]].delta));
    std::sort(dists.begin(), dists.end());
    const std::size_t k = std::min(neighbors, dists.size());
    scores[a] = std::accumulate(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
  }
  return scores;
}

/// Pool positions ordered by (score, client id).
inline std::vector<std::size_t> rank_by_score(const std::vector<Update>& updates, const std::vector<std::size_t>& pool,
                                              const std::vector<double>& scores) {
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return updates[pool[a]].client_id < updates[pool[b]].client_id;
  });
  return order;
}

inline void check_krum_bound(std::size_t n, int f) {
  if (f < 0) throw ConfigError("f must be >= 0");
  if (n < 2 * static_cast<std::size_t>(f) + 3)
    throw ConfigError("Krum needs at least 2f+3 updates (have " + std::to_string(n) + ", f=" + std::to_string(f) + ")");
}

}  // namespace detail

/// sum_k (n_k / sum_c n_c) * delta_k
inline ParamVector fedavg(const std::vector<Update>& updates) {
  detail::check_updates(updates);
  double total = 0.0;
  for (const Update& u : updates) total += static_cast<double>(u.n_k);
  if (!(total > 0.0)) throw ContractViolation("fedavg needs positive dataset sizes");
  ParamVector out(updates.front().delta.size());
  for (std::size_t i : detail::by_client_id(updates)) out.axpy(static_cast<double>(updates[i].n_k) / total, updates[i].delta);
  return out;
}

/// The update with the lowest Krum score; ties go to the lowest client id.
inline const Update& krum(const std::vector<Update>& updates, int f) {
  detail::check_updates(updates);
  detail::check_krum_bound(updates.size(), f);
  const std::vector<std::size_t> pool = detail::by_client_id(updates);
  const auto scores = detail::krum_scores(updates, pool, updates.size() - static_cast<std::size_t>(f) - 2);
  return updates[pool[detail::rank_by_score(updates, pool, scores).front()]];
}

/// Unweighted mean of the m lowest-scoring deltas. Default m = |updates| - f.
inline ParamVector multikrum(const std::vector<Update>& updates, int f, std::optional<int> m = std::nullopt) {
  detail::check_updates(updates);
  detail::check_krum_bound(updates.size(), f);
  const int take = m.value_or(static_cast<int>(updates.size()) - f);
  if (take < 1 || static_cast<std::size_t>(take) > updates.size())
    throw ConfigError("multikrum m must be in [1, |updates|]");
  const std::vector<std::size_t> pool = detail::by_client_id(updates);
  const auto scores = detail::krum_scores(updates, pool, updates.size() - static_cast<std::size_t>(f) - 2);
  const auto order = detail::rank_by_score(updates, pool, scores);
  std::vector<std::size_t> chosen;
  for (int i = 0; i < take; ++i) chosen.push_back(pool[order[static_cast<std::size_t>(i)]]);
  std::sort(chosen.begin(), chosen.end(),
            [&](std::size_t a, std::size_t b) { return updates[a].client_id < updates[b].client_id; });
  return detail::mean_of(updates, chosen);
}

/// Bulyan: recursive Krum selection of n - 2f updates, then per coordinate the
/// mean of the n - 4f selected values closest to the coordinate median.
inline ParamVector bulyan(const std::vector<Update>& updates, int f) {
  detail::check_updates(updates);
  if (f < 0) throw ConfigError("f must be >= 0");
  const std::size_t n = updates.size();
  const auto fs = static_cast<std::size_t>(f);
  if (n < 4 * fs + 3)
    throw ConfigError("Bulyan needs at least 4f+3 updates (have " + std::to_string(n) + ", f=" + std::to_string(f) + ")");

  // Selection phase. Krum on a shrinking pool; the neighbor count floors at 0.
  std::vector<std::size_t> remaining = detail::by_client_id(updates);
  std::vector<std::size_t> selected;
  const std::size_t target = n - 2 * fs;
  while (selected.size() < target) {
    const std::size_t neighbors = remaining.size() >= fs + 2 ? remaining.size() - fs - 2 : 0;
    const auto scores = detail::krum_scores(updates, remaining, neighbors);
    const std::size_t win = detail::rank_by_score(updates, remaining, scores).front();
    selected.push_back(remaining[win]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(win));
  }

  // Aggregation phase.
  const std::size_t keep = n - 4 * fs;
  const std::size_t dim = updates.front().delta.size();
  ParamVector out(dim);
  struct Entry {
    double value;
    int client_id;
  };
  std::vector<Entry> col(selected.size());
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t k = 0; k < selected.size(); ++k) col[k] = {updates[selected[k]].delta[c], updates[selected[k]].client_id};
    std::vector<double> sorted(col.size());
    std::transform(col.begin(), col.end(), sorted.begin(), [](const Entry& e) { return e.value; });
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    const double median = sorted.size() % 2 == 1 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    std::sort(col.begin(), col.end(), [&](const Entry& a, const Entry& b) {
      const double da = std::abs(a.value - median), db = std::abs(b.value - median);
      if (da != db) return da < db;
      if (std::abs(a.value) != std::abs(b.value)) return std::abs(a.value) < std::abs(b.value);
      return a.client_id < b.client_id;
    });
    // Sum in client-id order so the result does not depend on tie ordering.
    std::sort(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(keep),
              [](const Entry& a, const Entry& b) { return a.client_id < b.client_id; });
    double s = 0.0;
    for (std::size_t k = 0; k < keep; ++k) s += col[k].value;
    out[c] = s / static_cast<double>(keep);
  }
  return out;
}

// ---------------------------------------------------------------------------
// FoolsGold
// ---------------------------------------------------------------------------

/// Per-client sum of every delta ever submitted, and the latest weights.
struct FoolsGoldState {
  std::map<int, ParamVector> history;
  std::map<int, std::size_t> contributions;
  std::map<int, double> weights;
};

inline double cosine_similarity(const ParamVector& a, const ParamVector& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

/// Re-weighting of the published procedure, given the pairwise similarity
/// matrix of the current clients' histories. Returns weights in [0, 1].
inline std::vector<double> foolsgold_weights(std::vector<std::vector<double>> cs) {
  const std::size_t n = cs.size();
  // The diagonal counts as 0 (cos - 1), so every row maximum is >= 0.
  for (std::size_t i = 0; i < n; ++i) cs[i][i] = 0.0;
  std::vector<double> maxcs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) maxcs[i] = *std::max_element(cs[i].begin(), cs[i].end());

  // Pardoning: an honest client that merely resembles a more suspicious one
  // gets its similarity scaled down.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && maxcs[i] < maxcs[j]) cs[i][j] *= maxcs[i] / maxcs[j];

  std::vector<double> wv(n);
  for (std::size_t i = 0; i < n; ++i) wv[i] = std::clamp(1.0 - *std::max_element(cs[i].begin(), cs[i].end()), 0.0, 1.0);

  const double top = *std::max_element(wv.begin(), wv.end());
  if (top <= 0.0) return std::vector<double>(n, 0.0);
  for (double& w : wv) {
    w /= top;
    if (w == 1.0) w = 0.99;
    // Logit with confidence 1, clipped to [0, 1].
    w = std::log(w / (1.0 - w)) + 0.5;
    if (!std::isfinite(w) || w > 1.0) w = (w < 0.0 ? 0.0 : 1.0);
    if (w < 0.0) w = 0.0;
  }
  return wv;
}

/// Updates the histories, weights the current deltas and returns
/// sum(alpha_i delta_i) / sum(alpha_i). All-zero weights yield a zero delta.
inline ParamVector foolsgold(const std::vector<Update>& updates, FoolsGoldState& state) {
  detail::check_updates(updates);
  const std::vector<std::size_t> order = detail::by_client_id(updates);
  for (std::size_t i : order) {
    const Update& u = updates[i];
    auto [it, inserted] = state.history.try_emplace(u.client_id, u.delta.size());
    if (it->second.size() != u.delta.size()) throw ContractViolation("FoolsGold history dimension changed");
    it->second += u.delta;
    ++state.contributions[u.client_id];
  }

  const std::size_t n = order.size();
  std::vector<std::vector<double>> cs(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const double s = cosine_similarity(state.history.at(updates[order[a]].client_id),
                                         state.history.at(updates[order[b]].client_id));
      cs[a][b] = cs[b][a] = s;
    }
  const std::vector<double> w = foolsgold_weights(std::move(cs));

  state.weights.clear();
  ParamVector out(updates.front().delta.size());
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    state.weights[updates[order[k]].client_id] = w[k];
    out.axpy(w[k], updates[order[k]].delta);
    total += w[k];
  }
  if (total > 0.0) out *= 1.0 / total;
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

enum class AggregatorKind { fedavg, krum, multikrum, bulyan, foolsgold };

inline std::string_view to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::fedavg: return "none";
    case AggregatorKind::krum: return "krum";
    case AggregatorKind::multikrum: return "multikrum";
    case AggregatorKind::bulyan: return "bulyan";
    case AggregatorKind::foolsgold: return "foolsgold";
  }
  return "none";
}

/// "none" selects plain FedAvg.
inline AggregatorKind parse_aggregator(std::string_view name) {
  if (name == "none" || name == "fedavg") return AggregatorKind::fedavg;
  if (name == "krum") return AggregatorKind::krum;
  if (name == "multikrum") return AggregatorKind::multikrum;
  if (name == "bulyan") return AggregatorKind::bulyan;
  if (name == "foolsgold") return AggregatorKind::foolsgold;
  throw ConfigError("unknown aggregator '" + std::string(name) + "' (none|krum|multikrum|bulyan|foolsgold)");
}

struct AggregatorSpec {
  AggregatorKind kind = AggregatorKind::fedavg;
  int f = 1;
  std::optional<int> m;

  friend bool operator==(const AggregatorSpec&, const AggregatorSpec&) = default;
};

/// A configured rule plus the FoolsGold state it threads between rounds.
class Aggregator {
 public:
  explicit Aggregator(AggregatorSpec spec = {}) : spec_(spec) {}

  ParamVector aggregate(const std::vector<Update>& updates) {
    switch (spec_.kind) {
      case AggregatorKind::fedavg: return fedavg(updates);
      case AggregatorKind::krum: return krum(updates, spec_.f).delta;
      case AggregatorKind::multikrum: return multikrum(updates, spec_.f, spec_.m);
      case AggregatorKind::bulyan: return bulyan(updates, spec_.f);
      case AggregatorKind::foolsgold: return foolsgold(updates, foolsgold_);
    }
    throw ContractViolation("unreachable aggregator kind");
  }

  const AggregatorSpec& spec() const noexcept { return spec_; }
  const FoolsGoldState& foolsgold_state() const noexcept { return foolsgold_; }

 private:
  AggregatorSpec spec_;
  FoolsGoldState foolsgold_;
};

}  // namespace fedhp::defense

#endif  // FEDHP_DEFENSE_HPP
