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

// Small differentiable models with hand-derived gradients and the momentum /
// weight-decay SGD used by every simulated client.

#ifndef FEDHP_TENSOR_HPP
#define FEDHP_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedhp/core.hpp"

namespace fedhp {

// ---------------------------------------------------------------------------
// ParamVector
// ---------------------------------------------------------------------------

/// Flat parameter vector. Length is fixed by the owning architecture.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
  }

  ParamVector& operator+=(const ParamVector& o) {
    require(o.size() == size(), "ParamVector size mismatch");
    for (std::size_t i = 0; i < size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  ParamVector& operator-=(const ParamVector& o) {
    require(o.size() == size(), "ParamVector size mismatch");
    for (std::size_t i = 0; i < size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  ParamVector& operator*=(double s) noexcept {
    for (double& x : values_) x *= s;
    return *this;
  }

  /// this += s * o
  void axpy(double s, const ParamVector& o) {
    require(o.size() == size(), "ParamVector size mismatch");
    for (std::size_t i = 0; i < size(); ++i) values_[i] += s * o.values_[i];
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

inline ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
inline ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
inline ParamVector operator*(double s, ParamVector a) { return a *= s; }

inline double dot(const ParamVector& a, const ParamVector& b) {
  require(a.size() == b.size(), "ParamVector size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(const ParamVector& a, const ParamVector& b) {
  require(a.size() == b.size(), "ParamVector size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double norm(const ParamVector& a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct Sample {
  std::vector<double> x;
  int label = 0;  // 0 or 1

  friend bool operator==(const Sample&, const Sample&) = default;
};

using Dataset = std::vector<Sample>;

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

/// The five local-training hyperparameters (η, μ, λ, E, B).
struct SgdConfig {
  double eta = 0.1;
  double mu = 0.9;
  double lambda = 0.0005;
  int epochs = 2;
  int batch_size = 64;

  void validate() const {
    if (!(std::isfinite(eta) && eta >= 0.0)) throw ConfigError("eta must be finite and >= 0");
    if (!(mu >= 0.0 && mu < 1.0)) throw ConfigError("mu must be in [0, 1)");
    if (!(std::isfinite(lambda) && lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  }

  /// S = E * floor(n / B)
  std::size_t steps_for(std::size_t dataset_size) const {
    return static_cast<std::size_t>(epochs) * (dataset_size / static_cast<std::size_t>(batch_size));
  }

  friend bool operator==(const SgdConfig&, const SgdConfig&) = default;
};

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

enum class ModelKind { dln, mlp };
enum class Activation { tanh, relu };

/// DLN: layers = {d}, parameters (u, v), prediction <u ⊙ v, x>.
/// MLP: layers = {in, hidden..., 1}; per layer a row-major weight block then a bias block.
struct Architecture {
  ModelKind kind = ModelKind::dln;
  std::vector<std::size_t> layers{2};
  Activation activation = Activation::tanh;

  std::size_t input_dim() const { return layers.front(); }

  std::size_t param_count() const {
    if (kind == ModelKind::dln) return 2 * layers.front();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) n += layers[l + 1] * layers[l] + layers[l + 1];
    return n;
  }

  void validate() const {
    if (layers.empty() || layers.front() == 0) throw ContractViolation("architecture needs an input dimension");
    if (kind == ModelKind::dln) {
      if (layers.size() != 1) throw ContractViolation("DLN architecture is {d}");
      return;
    }
    if (layers.size() < 2 || layers.back() != 1) throw ContractViolation("MLP must end in a single logit");
    for (std::size_t w : layers)
      if (w == 0) throw ContractViolation("MLP layer width must be positive");
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

class Model {
 public:
  Model(Architecture arch, ParamVector params) : arch_(std::move(arch)), params_(std::move(params)) {
    arch_.validate();
    require(params_.size() == arch_.param_count(), "parameter count does not match architecture");
  }

  /// DLN with u = 0.5/sqrt(d) and v = 0, so the initial prediction is zero.
  /// Starting with u = v would keep u = v forever (symmetric gradients) and
  /// restrict every effective weight u_j*v_j to be non-negative.
  static Model dln(std::size_t d) {
    Architecture a{ModelKind::dln, {d}, Activation::tanh};
    ParamVector p(2 * d);
    for (std::size_t j = 0; j < d; ++j) p[j] = 0.5 / std::sqrt(static_cast<double>(d));
    return Model(a, std::move(p));
  }

  static Model zeros(const Architecture& arch) { return Model(arch, ParamVector(arch.param_count())); }

  /// Glorot-uniform weights, zero biases.
  static Model mlp(std::vector<std::size_t> layers, Activation act, Rng& init_rng) {
    Architecture a{ModelKind::mlp, std::move(layers), act};
    a.validate();
    ParamVector p(a.param_count());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < a.layers.size(); ++l) {
      const std::size_t in = a.layers[l], out = a.layers[l + 1];
      const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (std::size_t i = 0; i < in * out; ++i) p[off + i] = u(init_rng);
      off += in * out + out;
    }
    return Model(std::move(a), std::move(p));
  }

  const Architecture& architecture() const noexcept { return arch_; }
  const ParamVector& params() const noexcept { return params_; }

  void set_params(ParamVector p) {
    require(p.size() == arch_.param_count(), "parameter count does not match architecture");
    params_ = std::move(p);
  }

 private:
  Architecture arch_;
  ParamVector params_;
};

namespace detail {

inline double activate(Activation a, double z) { return a == Activation::tanh ? std::tanh(z) : std::max(0.0, z); }

/// d act / dz expressed through the activation output h.
inline double activate_deriv(Activation a, double h) {
  return a == Activation::tanh ? 1.0 - h * h : (h > 0.0 ? 1.0 : 0.0);
}

inline double stable_bce(double logit, int label) {
  // softplus(z) - y z
  return std::max(logit, 0.0) - static_cast<double>(label) * logit + std::log1p(std::exp(-std::abs(logit)));
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Scratch buffers for one MLP pass; sized once per batch.
struct MlpWorkspace {
  std::vector<std::vector<double>> act;    // act[0] = input, act[l] = layer l output
  std::vector<std::vector<double>> delta;  // dloss/dz per layer

  explicit MlpWorkspace(const Architecture& a) {
    act.resize(a.layers.size());
    delta.resize(a.layers.size());
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      act[l].assign(a.layers[l], 0.0);
      delta[l].assign(a.layers[l], 0.0);
    }
  }
};

inline double mlp_forward(const Architecture& a, std::span<const double> p, std::span<const double> x,
                          MlpWorkspace& ws) {
  std::copy(x.begin(), x.end(), ws.act[0].begin());
  std::size_t off = 0;
  const std::size_t last = a.layers.size() - 1;
  for (std::size_t l = 0; l < last; ++l) {
    const std::size_t in = a.layers[l], out = a.layers[l + 1];
    const double* w = p.data() + off;
    const double* b = w + in * out;
    const auto& prev = ws.act[l];
    auto& cur = ws.act[l + 1];
    for (std::size_t o = 0; o < out; ++o) {
      double z = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) z += row[i] * prev[i];
      cur[o] = (l + 1 == last) ? z : activate(a.activation, z);
    }
    off += in * out + out;
  }
  return ws.act[last][0];
}

/// Accumulates dloss/dparams for one sample with dloss/dlogit = g.
inline void mlp_backward(const Architecture& a, std::span<const double> p, double g, MlpWorkspace& ws,
                         std::span<double> grad) {
  const std::size_t last = a.layers.size() - 1;
  std::vector<std::size_t> offsets(last);
  std::size_t off = 0;
  for (std::size_t l = 0; l < last; ++l) {
    offsets[l] = off;
    off += a.layers[l + 1] * a.layers[l] + a.layers[l + 1];
  }
  ws.delta[last][0] = g;
  for (std::size_t l = last; l-- > 0;) {
    const std::size_t in = a.layers[l], out = a.layers[l + 1];
    const double* w = p.data() + offsets[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + in * out;
    const auto& prev = ws.act[l];
    const auto& d = ws.delta[l + 1];
    for (std::size_t o = 0; o < out; ++o) {
      gb[o] += d[o];
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d[o] * prev[i];
    }
    if (l == 0) break;
    auto& dprev = ws.delta[l];
    for (std::size_t i = 0; i < in; ++i) {
      double s = 0.0;
      for (std::size_t o = 0; o < out; ++o) s += w[o * in + i] * d[o];
      dprev[i] = s * activate_deriv(a.activation, prev[i]);
    }
  }
}

inline double dln_forward(std::span<const double> p, std::span<const double> x) {
  const std::size_t d = x.size();
  double z = 0.0;
  for (std::size_t j = 0; j < d; ++j) z += p[j] * p[d + j] * x[j];
  return z;
}

/// Mean BCE and its gradient over the samples selected by `indices`.
/// Samples are visited in ascending index order so the result depends only on the set.
inline double batch_loss_grad(const Architecture& a, std::span<const double> p, const Dataset& data,
                              std::span<const std::size_t> indices, std::span<double> grad) {
  require(!indices.empty(), "loss_and_grad needs a non-empty batch");
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  const std::size_t d = a.input_dim();
  if (a.kind == ModelKind::dln) {
    for (std::size_t idx : indices) {
      const Sample& s = data[idx];
      require(s.x.size() == d, "input dimension mismatch");
      const double z = dln_forward(p, s.x);
      loss += stable_bce(z, s.label);
      const double g = sigmoid(z) - static_cast<double>(s.label);
      for (std::size_t j = 0; j < d; ++j) {
        grad[j] += g * p[d + j] * s.x[j];
        grad[d + j] += g * p[j] * s.x[j];
      }
    }
  } else {
    MlpWorkspace ws(a);
    for (std::size_t idx : indices) {
      const Sample& s = data[idx];
      require(s.x.size() == d, "input dimension mismatch");
      const double z = mlp_forward(a, p, s.x, ws);
      loss += stable_bce(z, s.label);
      mlp_backward(a, p, sigmoid(z) - static_cast<double>(s.label), ws, grad);
    }
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (double& g : grad) g *= inv;
  return loss * inv;
}

}  // namespace detail

/// Scalar logit; P(class 1) = sigmoid(logit).
inline double forward(const Model& model, std::span<const double> input) {
  const Architecture& a = model.architecture();
  if (input.size() != a.input_dim()) throw ContractViolation("input dimension mismatch");
  if (a.kind == ModelKind::dln) return detail::dln_forward(model.params().span(), input);
  detail::MlpWorkspace ws(a);
  return detail::mlp_forward(a, model.params().span(), input, ws);
}

inline int predict_class(const Model& model, std::span<const double> input) {
  return forward(model, input) > 0.0 ? 1 : 0;
}

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Mean binary cross-entropy of the batch and its exact gradient.
inline LossGrad loss_and_grad(const Model& model, const Dataset& batch) {
  if (batch.empty()) throw ContractViolation("loss_and_grad needs a non-empty batch");
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  LossGrad out{0.0, ParamVector(model.params().size())};
  out.loss = detail::batch_loss_grad(model.architecture(), model.params().span(), batch, idx, out.grad.span());
  return out;
}

/// Mean BCE only.
inline double mean_loss(const Model& model, const Dataset& data) {
  if (data.empty()) throw ContractViolation("mean_loss needs a non-empty dataset");
  const Architecture& a = model.architecture();
  const auto p = model.params().span();
  double loss = 0.0;
  if (a.kind == ModelKind::dln) {
    for (const Sample& s : data) loss += detail::stable_bce(detail::dln_forward(p, s.x), s.label);
  } else {
    detail::MlpWorkspace ws(a);
    for (const Sample& s : data) loss += detail::stable_bce(detail::mlp_forward(a, p, s.x, ws), s.label);
  }
  return loss / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// SGD
// ---------------------------------------------------------------------------

/// Momentum buffer. Zeroed at the start of every local training run.
struct VelocityState {
  ParamVector v;
  friend bool operator==(const VelocityState&, const VelocityState&) = default;
};

struct SgdStepResult {
  ParamVector params;
  VelocityState velocity;
};

/// v <- grad + lambda*theta (+ mu*v unless first step); theta <- theta - eta*v.
inline void sgd_step_inplace(ParamVector& params, ParamVector& velocity, std::span<const double> grad,
                             const SgdConfig& cfg, bool is_first_step, std::size_t step_index = 0) {
  const std::size_t n = params.size();
  require(grad.size() == n && velocity.size() == n, "sgd_step shape mismatch");
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    double v = grad[i] + cfg.lambda * params[i];
    if (!is_first_step) v += cfg.mu * velocity[i];
    velocity[i] = v;
    params[i] -= cfg.eta * v;
    finite = finite && std::isfinite(params[i]) && std::isfinite(v);
  }
  if (!finite) throw DivergenceError("non-finite parameter after SGD step", step_index);
}

inline SgdStepResult sgd_step(const ParamVector& params, const VelocityState& velocity, const ParamVector& grad,
                              const SgdConfig& cfg, bool is_first_step, std::size_t step_index = 0) {
  SgdStepResult out{params, velocity};
  if (out.velocity.v.empty()) out.velocity.v = ParamVector(params.size());
  sgd_step_inplace(out.params, out.velocity.v, grad.span(), cfg, is_first_step, step_index);
  return out;
}

/// E epochs of shuffled mini-batch SGD (partial batches dropped) from a zero
/// velocity. Returns theta_final - theta_initial, accumulated step by step.
inline ParamVector local_train(const Model& model, const Dataset& dataset, const SgdConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = dataset.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  if (n < batch) throw ContractViolation("local_train: dataset smaller than batch size");

  const Architecture& arch = model.architecture();
  ParamVector theta = model.params();
  ParamVector velocity(theta.size());
  ParamVector displacement(theta.size());
  std::vector<double> grad(theta.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  const std::size_t per_epoch = n / batch;
  std::size_t step = 0;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < per_epoch; ++b) {
      std::span<std::size_t> idx(order.data() + b * batch, batch);
      std::sort(idx.begin(), idx.end());
      detail::batch_loss_grad(arch, theta.span(), dataset, idx, grad);
      sgd_step_inplace(theta, velocity, grad, cfg, step == 0, step);
      for (std::size_t i = 0; i < theta.size(); ++i) displacement[i] -= cfg.eta * velocity[i];
      ++step;
    }
  }
  return displacement;
}

}  // namespace fedhp

#endif  // FEDHP_TENSOR_HPP
