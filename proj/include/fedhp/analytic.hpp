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

// Two-group dynamics: all benign clients collapse into one group optimizing
// F_b (main task) and all malicious clients into one optimizing F_m (backdoor).
// Both groups branch from the shared global model every round and the server
// combines their deltas with weights (1 - alpha, alpha).

#ifndef FEDHP_ANALYTIC_HPP
#define FEDHP_ANALYTIC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fedhp/core.hpp"
#include "fedhp/tensor.hpp"

namespace fedhp::analytic {

/// Main task on [-1,1]^2: class 1 strictly above the diagonal.
inline int main_label(double x1, double x2) { return x2 > x1 ? 1 : 0; }

inline constexpr int kBackdoorTarget = 1;

inline Dataset gen_main_dataset(std::size_t n, Rng& rng) {
  require(n >= 1, "gen_main_dataset: n >= 1");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = u(rng);
    const double x2 = u(rng);
    out.push_back({{x1, x2}, main_label(x1, x2)});
  }
  return out;
}

/// x1 ~ U[0,1], x2 ~ U[0,x1], every point labeled with the backdoor target.
inline Dataset gen_backdoor_dataset(std::size_t n, Rng& rng) {
  require(n >= 1, "gen_backdoor_dataset: n >= 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = u(rng);
    const double x2 = x1 * u(rng);
    out.push_back({{x1, x2}, kBackdoorTarget});
  }
  return out;
}

/// Benign/malicious training configurations plus the group mixing weight.
/// `malicious.eta` is always `beta * benign.eta`; call sync() after edits.
struct GroupHyper {
  SgdConfig benign;
  SgdConfig malicious;
  double alpha = 0.1;
  double beta = 1.0;

  void sync() { malicious.eta = beta * benign.eta; }

  void validate() const {
    benign.validate();
    malicious.validate();
    if (!(alpha >= 0.0 && alpha <= 0.5)) throw ConfigError("alpha must be in [0, 0.5]");
    if (!(beta > 0.0 && std::isfinite(beta))) throw ConfigError("beta must be > 0");
    if (std::abs(malicious.eta - beta * benign.eta) > 1e-12)
      throw ConfigError("malicious eta must equal beta * benign eta");
  }

  friend bool operator==(const GroupHyper&, const GroupHyper&) = default;
};

/// E=2, B=64, mu=0.9, lambda=5e-4 for both groups, eta_b=0.1, beta=1.
inline GroupHyper default_group_hyper() {
  GroupHyper h;
  h.benign = SgdConfig{0.1, 0.9, 0.0005, 2, 64};
  h.malicious = h.benign;
  h.alpha = 0.1;
  h.beta = 1.0;
  h.sync();
  return h;
}

struct TwoGroupState {
  ParamVector theta;
  VelocityState v_b;
  VelocityState v_m;
  int round = 0;
};

inline TwoGroupState initial_state(const Model& model) {
  const std::size_t n = model.params().size();
  return TwoGroupState{model.params(), {ParamVector(n)}, {ParamVector(n)}, 0};
}

/// One round of the recursion: theta^t = theta^{t-1} + (1-alpha) Δ_b + alpha Δ_m,
/// with each Δ produced by S = E*floor(|D|/B) momentum/weight-decay SGD steps
/// from theta^{t-1}. Throws DivergenceError if either group diverges.
inline TwoGroupState simulate_round(const Architecture& arch, const TwoGroupState& state, const GroupHyper& hyper,
                                    const Dataset& benign_data, const Dataset& malicious_data, Rng& benign_rng,
                                    Rng& malicious_rng) {
  auto zeroed = [](const VelocityState& v) {
    return std::all_of(v.v.begin(), v.v.end(), [](double x) { return x == 0.0; });
  };
  require(zeroed(state.v_b) && zeroed(state.v_m), "simulate_round: velocities must be zero at round start");

  const Model global(arch, state.theta);
  const ParamVector delta_b = local_train(global, benign_data, hyper.benign, benign_rng);
  const ParamVector delta_m = local_train(global, malicious_data, hyper.malicious, malicious_rng);

  TwoGroupState next;
  next.theta = state.theta;
  const double wb = 1.0 - hyper.alpha;
  const double wm = hyper.alpha;
  for (std::size_t i = 0; i < next.theta.size(); ++i) next.theta[i] += wb * delta_b[i] + wm * delta_m[i];
  if (!next.theta.all_finite()) throw DivergenceError("global model diverged", 0);
  next.v_b = VelocityState{ParamVector(state.theta.size())};
  next.v_m = VelocityState{ParamVector(state.theta.size())};
  next.round = state.round + 1;
  return next;
}

/// Dataset sizes, mix-in ratio and the two independent seed streams.
struct AnalyticSetup {
  std::size_t group_size = 512;
  std::size_t holdout_size = 2048;
  double mixin = 0.9;  // fraction of the malicious group's data drawn from the main task
  std::uint64_t data_seed = 1;
  std::uint64_t sgd_seed = 2;

  friend bool operator==(const AnalyticSetup&, const AnalyticSetup&) = default;
};

/// The fixed objectives F_b, F_m and the held-out backdoor set used to score F_m.
struct GroupData {
  Dataset benign;
  Dataset malicious;
  Dataset holdout;
};

inline GroupData make_group_data(const AnalyticSetup& setup) {
  if (!(setup.mixin >= 0.0 && setup.mixin <= 1.0)) throw ConfigError("mixin must be in [0, 1]");
  Rng rb = make_rng(setup.data_seed, {stream_tag("analytic/benign")});
  Rng rm = make_rng(setup.data_seed, {stream_tag("analytic/malicious")});
  Rng rh = make_rng(setup.data_seed, {stream_tag("analytic/holdout")});
  GroupData d;
  d.benign = gen_main_dataset(setup.group_size, rb);
  d.malicious = gen_backdoor_dataset(setup.group_size, rm);
  const auto n_mix = static_cast<std::size_t>(std::floor(setup.mixin * static_cast<double>(setup.group_size)));
  if (n_mix > 0) {
    Dataset mix = gen_main_dataset(n_mix, rm);
    std::copy(mix.begin(), mix.end(), d.malicious.begin());
  }
  d.holdout = gen_backdoor_dataset(setup.holdout_size, rh);
  return d;
}

/// Mean of F_m(theta^t) over t = 1..rounds, or a divergence marker.
struct MaliciousLoss {
  double value = 0.0;
  bool diverged = false;
  friend bool operator==(const MaliciousLoss&, const MaliciousLoss&) = default;
};

inline MaliciousLoss avg_malicious_loss(const GroupHyper& hyper, int rounds, const Model& initial,
                                        const GroupData& data, std::uint64_t sgd_seed) {
  hyper.validate();
  require(rounds >= 1, "avg_malicious_loss: rounds >= 1");
  const Architecture& arch = initial.architecture();
  Rng rb = make_rng(sgd_seed, {stream_tag("analytic/sgd/benign")});
  Rng rm = make_rng(sgd_seed, {stream_tag("analytic/sgd/malicious")});
  TwoGroupState state = initial_state(initial);
  double sum = 0.0;
  try {
    for (int t = 1; t <= rounds; ++t) {
      state = simulate_round(arch, state, hyper, data.benign, data.malicious, rb, rm);
      const double loss = mean_loss(Model(arch, state.theta), data.holdout);
      if (!std::isfinite(loss)) return {0.0, true};
      sum += loss;
    }
  } catch (const DivergenceError&) {
    return {0.0, true};
  }
  return {sum / rounds, false};
}

inline MaliciousLoss avg_malicious_loss(const GroupHyper& hyper, int rounds, const Model& initial,
                                        const AnalyticSetup& setup) {
  return avg_malicious_loss(hyper, rounds, initial, make_group_data(setup), setup.sgd_seed);
}

// ---------------------------------------------------------------------------
// Surfaces
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 10> kSurfaceAxes{"eta_b", "beta", "mu_b",     "mu_m", "lambda_b",
                                                               "lambda_m", "E_b", "E_m", "B_b", "B_m"};

inline bool is_surface_axis(std::string_view name) {
  return std::find(kSurfaceAxes.begin(), kSurfaceAxes.end(), name) != kSurfaceAxes.end();
}

/// Sets one named hyperparameter and keeps eta_m = beta * eta_b.
inline void set_axis(GroupHyper& h, std::string_view name, double value) {
  auto as_int = [&](std::string_view what) {
    const double r = std::round(value);
    if (std::abs(r - value) > 1e-9 || r < 1) throw ConfigError(std::string(what) + " must be a positive integer");
    return static_cast<int>(r);
  };
  if (name == "eta_b") h.benign.eta = value;
  else if (name == "beta") h.beta = value;
  else if (name == "mu_b") h.benign.mu = value;
  else if (name == "mu_m") h.malicious.mu = value;
  else if (name == "lambda_b") h.benign.lambda = value;
  else if (name == "lambda_m") h.malicious.lambda = value;
  else if (name == "E_b") h.benign.epochs = as_int(name);
  else if (name == "E_m") h.malicious.epochs = as_int(name);
  else if (name == "B_b") h.benign.batch_size = as_int(name);
  else if (name == "B_m") h.malicious.batch_size = as_int(name);
  else throw ConfigError("unknown surface axis '" + std::string(name) + "'");
  h.sync();
}

struct Axis {
  std::string name;
  std::vector<double> values;
  friend bool operator==(const Axis&, const Axis&) = default;
};

/// Dense row-major grid: cell(i, j) is axis1.values[i] x axis2.values[j].
struct Surface {
  Axis axis1;
  Axis axis2;
  std::vector<MaliciousLoss> cells;

  const MaliciousLoss& cell(std::size_t i, std::size_t j) const { return cells.at(i * axis2.values.size() + j); }
};

/// Per-cell SGD stream; the datasets (hence F_b and F_m) are shared by all cells.
inline std::uint64_t cell_seed(std::uint64_t sgd_seed, std::size_t i, std::size_t j) {
  return derive_seed(sgd_seed, {stream_tag("analytic/cell"), i, j});
}

inline Surface sweep_surface(const Axis& axis1, const Axis& axis2, const GroupHyper& base, int rounds,
                             const Model& initial, const AnalyticSetup& setup) {
  if (!is_surface_axis(axis1.name)) throw ConfigError("unknown surface axis '" + axis1.name + "'");
  if (!is_surface_axis(axis2.name)) throw ConfigError("unknown surface axis '" + axis2.name + "'");
  if (axis1.values.empty() || axis2.values.empty()) throw ConfigError("surface axes must be non-empty");

  const GroupData data = make_group_data(setup);
  Surface s{axis1, axis2, {}};
  s.cells.resize(axis1.values.size() * axis2.values.size());
  for (std::size_t i = 0; i < axis1.values.size(); ++i) {
    for (std::size_t j = 0; j < axis2.values.size(); ++j) {
      GroupHyper h = base;
      set_axis(h, axis1.name, axis1.values[i]);
      set_axis(h, axis2.name, axis2.values[j]);
      s.cells[i * axis2.values.size() + j] = avg_malicious_loss(h, rounds, initial, data, cell_seed(setup.sgd_seed, i, j));
    }
  }
  return s;
}

/// Long-form CSV: axis1_value,axis2_value,avg_malicious_loss,diverged_flag. Divergent cells carry NA.
inline void write_surface_csv(std::ostream& os, const Surface& s) {
  os << "axis1_value,axis2_value,avg_malicious_loss,diverged_flag\n";
  for (std::size_t i = 0; i < s.axis1.values.size(); ++i) {
    for (std::size_t j = 0; j < s.axis2.values.size(); ++j) {
      const MaliciousLoss& c = s.cell(i, j);
      os << format_double(s.axis1.values[i]) << ',' << format_double(s.axis2.values[j]) << ','
         << (c.diverged ? std::string("NA") : format_double(c.value)) << ',' << (c.diverged ? 1 : 0) << '\n';
    }
  }
}

}  // namespace fedhp::analytic

#endif  // FEDHP_ANALYTIC_HPP
