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

// Accuracy metrics, backdoor lifespan, phase averages and OLS regression.

#ifndef FEDHP_EVAL_HPP
#define FEDHP_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fedhp/core.hpp"
#include "fedhp/tensor.hpp"

namespace fedhp::eval {

// ---------------------------------------------------------------------------
// Accuracy
// ---------------------------------------------------------------------------

inline double mta(const Model& model, const Dataset& test_set) {
  if (test_set.empty()) throw ContractViolation("mta needs a non-empty test set");
  std::size_t hits = 0;
  for (const Sample& s : test_set) hits += predict_class(model, s.x) == s.label;
  return static_cast<double>(hits) / static_cast<double>(test_set.size());
}

/// Fraction of (already triggered) inputs classified as `target`.
inline double bda(const Model& model, const Dataset& backdoor_set, int target) {
  if (backdoor_set.empty()) throw ContractViolation("bda needs a non-empty backdoor set");
  std::size_t hits = 0;
  for (const Sample& s : backdoor_set) hits += predict_class(model, s.x) == target;
  return static_cast<double>(hits) / static_cast<double>(backdoor_set.size());
}

// ---------------------------------------------------------------------------
// Lifespan and phase averages
// ---------------------------------------------------------------------------

struct MetricConfig {
  double span_threshold = 0.5;
  int attack_end_round = 0;

  void validate() const {
    if (!(span_threshold >= 0.0 && span_threshold <= 1.0)) throw ConfigError("span_threshold must be in [0, 1]");
  }
};

/// `bda[k]` is the value at round first_round + k. Returns
/// max{t > t0 : bda_t > gamma} - t0, or 0 when no such round exists.
inline int span(std::span<const double> bda, const MetricConfig& cfg, int first_round = 1) {
  cfg.validate();
  int last = cfg.attack_end_round;
  for (std::size_t k = 0; k < bda.size(); ++k) {
    const int t = first_round + static_cast<int>(k);
    if (t > cfg.attack_end_round && bda[k] > cfg.span_threshold) last = t;
  }
  return last - cfg.attack_end_round;
}

struct RoundPoint {
  int round = 0;
  double mta = 0.0;
  double bda = 0.0;
};

struct PhaseAverages {
  double mta = 0.0;
  double bda = 0.0;
  std::optional<double> mta_star;
  std::optional<double> bda_star;
};

/// Means over [a_s, a_e] and over t > a_e (absent when that phase is empty).
inline PhaseAverages phase_averages(std::span<const RoundPoint> log, int a_s, int a_e) {
  if (log.empty()) throw ContractViolation("phase_averages needs a non-empty log");
  if (a_s > a_e) throw ContractViolation("attack window must satisfy a_s <= a_e");
  const auto [lo, hi] = std::minmax_element(log.begin(), log.end(),
                                            [](const RoundPoint& a, const RoundPoint& b) { return a.round < b.round; });
  if (a_s < lo->round || a_e > hi->round) throw ContractViolation("attack window outside the logged rounds");

  // Running means: a constant phase averages to exactly that constant.
  double m = 0, b = 0, ms = 0, bs = 0;
  std::size_t n = 0, ns = 0;
  for (const RoundPoint& p : log) {
    if (p.round >= a_s && p.round <= a_e) {
      ++n;
      m += (p.mta - m) / static_cast<double>(n);
      b += (p.bda - b) / static_cast<double>(n);
    } else if (p.round > a_e) {
      ++ns;
      ms += (p.mta - ms) / static_cast<double>(ns);
      bs += (p.bda - bs) / static_cast<double>(ns);
    }
  }
  if (n == 0) throw ContractViolation("no logged rounds inside the attack window");
  PhaseAverages out{m, b, std::nullopt, std::nullopt};
  if (ns > 0) {
    out.mta_star = ms;
    out.bda_star = bs;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Student-t distribution
// ---------------------------------------------------------------------------

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double betacf(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) return h;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ContractViolation("incomplete_beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
  return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

namespace detail {

// P(|T| >= |t|). Near zero the complementary form keeps full precision.
inline double t_two_tail(double t, double dof) {
  const double t2 = t * t;
  if (t2 < dof) return 1.0 - incomplete_beta(0.5, 0.5 * dof, t2 / (dof + t2));
  return incomplete_beta(0.5 * dof, 0.5, dof / (dof + t2));
}

}  // namespace detail

/// P(T <= t) for Student's t with `dof` degrees of freedom.
inline double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw ContractViolation("student_t_cdf needs dof > 0");
  if (std::isnan(t)) return t;
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * detail::t_two_tail(t, dof);
  return t >= 0.0 ? 1.0 - tail : tail;
}

/// Two-sided p-value P(|T| >= |t|).
inline double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw ContractViolation("student_t_two_sided_p needs dof > 0");
  if (std::isinf(t)) return 0.0;
  return std::clamp(detail::t_two_tail(t, dof), 0.0, 1.0);
}

/// Inverse CDF by bisection on the monotone CDF.
inline double student_t_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw ContractViolation("student_t_quantile needs p in (0, 1)");
  double lo = -1.0, hi = 1.0;
  while (student_t_cdf(lo, dof) > p) lo *= 2.0;
  while (student_t_cdf(hi, dof) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, dof) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// OLS
// ---------------------------------------------------------------------------

/// Row-major observation matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct Normalized {
  Matrix x;
  std::vector<double> means;
  std::vector<double> stddevs;
};

/// Zero mean, unit (population) variance per column.
inline Normalized normalize(const Matrix& x, const std::vector<std::string>& names) {
  if (names.size() != x.cols) throw ContractViolation("one name per predictor column");
  if (x.rows == 0) throw ContractViolation("normalize needs observations");
  Normalized out{x, std::vector<double>(x.cols), std::vector<double>(x.cols)};
  for (std::size_t c = 0; c < x.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) mean += x(r, c);
    mean /= static_cast<double>(x.rows);
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(var / static_cast<double>(x.rows));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) throw SingularityError("constant predictor", names[c]);
    for (std::size_t r = 0; r < x.rows; ++r) out.x(r, c) = (x(r, c) - mean) / sd;
    out.means[c] = mean;
    out.stddevs[c] = sd;
  }
  return out;
}

struct CoefficientRow {
  std::string name;
  double coef = 0.0;
  double std_err = 0.0;
  double t = 0.0;
  double p = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct RegressionReport {
  /// Intercept ("const") first, then predictors in column order.
  std::vector<CoefficientRow> rows;
  double r_squared = 0.0;
  std::size_t observations = 0;
  std::size_t dof_resid = 0;
};

/// OLS with an internal intercept, solved by modified Gram-Schmidt QR.
inline RegressionReport ols_regress(const Matrix& x, std::span<const double> y, const std::vector<std::string>& names) {
  if (names.size() != x.cols) throw ContractViolation("one name per predictor column");
  if (y.size() != x.rows) throw ContractViolation("one response per observation");
  const std::size_t n = x.rows, k = x.cols + 1;
  if (n <= k) throw ContractViolation("ols_regress needs rows > predictors + 1");

  // Design with intercept, column-major for the orthogonalization.
  std::vector<std::vector<double>> q(k, std::vector<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    q[0][r] = 1.0;
    for (std::size_t c = 0; c < x.cols; ++c) q[c + 1][r] = x(r, c);
  }
  std::vector<double> r_mat(k * k, 0.0);
  auto R = [&](std::size_t i, std::size_t j) -> double& { return r_mat[i * k + j]; };
  for (std::size_t j = 0; j < k; ++j) {
    double orig = 0.0;
    for (double v : q[j]) orig += v * v;
    orig = std::sqrt(orig);
    for (std::size_t i = 0; i < j; ++i) {
      double d = 0.0;
      for (std::size_t r = 0; r < n; ++r) d += q[i][r] * q[j][r];
      R(i, j) = d;
      for (std::size_t r = 0; r < n; ++r) q[j][r] -= d * q[i][r];
    }
    double nrm = 0.0;
    for (double v : q[j]) nrm += v * v;
    nrm = std::sqrt(nrm);
    if (!(nrm > 1e-10 * std::max(orig, 1.0))) throw SingularityError("rank-deficient design", j == 0 ? "const" : names[j - 1]);
    R(j, j) = nrm;
    for (double& v : q[j]) v /= nrm;
  }

  // beta = R^-1 Q^T y
  std::vector<double> qty(k, 0.0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t r = 0; r < n; ++r) qty[j] += q[j][r] * y[r];
  std::vector<double> beta(k, 0.0);
  for (std::size_t j = k; j-- > 0;) {
    double s = qty[j];
    for (std::size_t i = j + 1; i < k; ++i) s -= R(j, i) * beta[i];
    beta[j] = s / R(j, j);
  }

  // (X^T X)^-1 = R^-1 R^-T; diag_j = sum_i (R^-1)_{ji}^2
  std::vector<double> rinv(k * k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = k; j-- > 0;) {
      double s = (j == c) ? 1.0 : 0.0;
      for (std::size_t i = j + 1; i < k; ++i) s -= R(j, i) * rinv[i * k + c];
      rinv[j * k + c] = s / R(j, j);
    }
  }

  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double fit = beta[0];
    for (std::size_t c = 0; c < x.cols; ++c) fit += beta[c + 1] * x(r, c);
    ss_res += (y[r] - fit) * (y[r] - fit);
    ss_tot += (y[r] - ybar) * (y[r] - ybar);
  }
  const std::size_t dof = n - k;
  const double sigma2 = ss_res / static_cast<double>(dof);
  const double tcrit = student_t_quantile(0.975, static_cast<double>(dof));

  RegressionReport rep;
  rep.observations = n;
  rep.dof_resid = dof;
  rep.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  for (std::size_t j = 0; j < k; ++j) {
    double diag = 0.0;
    for (std::size_t i = 0; i < k; ++i) diag += rinv[j * k + i] * rinv[j * k + i];
    CoefficientRow row;
    row.name = j == 0 ? "const" : names[j - 1];
    row.coef = beta[j];
    row.std_err = std::sqrt(sigma2 * diag);
    if (row.std_err > 0.0) {
      row.t = row.coef / row.std_err;
      row.p = student_t_two_sided_p(row.t, static_cast<double>(dof));
    } else {
      // Perfect fit: the coefficient is exact.
      row.t = row.coef == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), row.coef);
      row.p = row.coef == 0.0 ? 1.0 : 0.0;
    }
    row.ci_low = row.coef - tcrit * row.std_err;
    row.ci_high = row.coef + tcrit * row.std_err;
    rep.rows.push_back(row);
  }
  return rep;
}

inline void write_markdown(std::ostream& os, const RegressionReport& rep) {
  os << "| | coef | std err | t | P>\\|t\\| | [0.025 | 0.975] |\n";
  os << "|---|---:|---:|---:|---:|---:|---:|\n";
  char buf[256];
  for (const CoefficientRow& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "| %s | %.4f | %.4f | %.3f | %.3f | %.4f | %.4f |\n", r.name.c_str(), r.coef,
                  r.std_err, r.t, r.p, r.ci_low, r.ci_high);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "\nR-squared: %.4f (n = %zu, residual dof = %zu)\n", rep.r_squared, rep.observations,
                rep.dof_resid);
  os << buf;
}

}  // namespace fedhp::eval

#endif  // FEDHP_EVAL_HPP
