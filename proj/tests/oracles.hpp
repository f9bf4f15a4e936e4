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

// Straight-line reference implementations used only by tests. They share no
// code with the library beyond the plain data types.

#ifndef FEDHP_TESTS_ORACLES_HPP
#define FEDHP_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fedhp/defense.hpp"
#include "fedhp/eval.hpp"
#include "fedhp/search.hpp"
#include "fedhp/tensor.hpp"

namespace oracle {

using fedhp::ParamVector;
using fedhp::defense::Update;

inline double dist2(const ParamVector& a, const ParamVector& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// Krum score of member `i` of `set`, with `nb` nearest neighbours.
inline double krum_score(const std::vector<Update>& set, std::size_t i, long nb) {
  std::vector<double> d;
  for (std::size_t j = 0; j < set.size(); ++j)
    if (j != i) d.push_back(dist2(set[i].delta, set[j].delta));
  std::sort(d.begin(), d.end());
  double s = 0;
  for (long k = 0; k < nb && k < static_cast<long>(d.size()); ++k) s += d[static_cast<std::size_t>(k)];
  return s;
}

/// Position in `set` of the Krum winner (lowest score, then lowest id).
inline std::size_t krum_winner(const std::vector<Update>& set, long nb) {
  std::size_t best = 0;
  double best_s = krum_score(set, 0, nb);
  for (std::size_t i = 1; i < set.size(); ++i) {
    const double s = krum_score(set, i, nb);
    if (s < best_s || (s == best_s && set[i].client_id < set[best].client_id)) {
      best = i;
      best_s = s;
    }
  }
  return best;
}

inline ParamVector krum(const std::vector<Update>& u, int f) {
  return u[krum_winner(u, static_cast<long>(u.size()) - f - 2)].delta;
}

inline ParamVector multikrum(const std::vector<Update>& u, int f, int m) {
  const long nb = static_cast<long>(u.size()) - f - 2;
  std::vector<std::pair<double, int>> scored;
  for (std::size_t i = 0; i < u.size(); ++i) scored.push_back({krum_score(u, i, nb), static_cast<int>(i)});
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return u[static_cast<std::size_t>(a.second)].client_id < u[static_cast<std::size_t>(b.second)].client_id;
  });
  std::vector<const Update*> chosen;
  for (int k = 0; k < m; ++k) chosen.push_back(&u[static_cast<std::size_t>(scored[static_cast<std::size_t>(k)].second)]);
  std::sort(chosen.begin(), chosen.end(), [](const Update* a, const Update* b) { return a->client_id < b->client_id; });
  ParamVector out(u[0].delta.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    double s = 0;
    for (const Update* p : chosen) s += p->delta[c];
    out[c] = s / m;
  }
  return out;
}

inline ParamVector bulyan(std::vector<Update> pool, int f) {
  const std::size_t n = pool.size();
  std::sort(pool.begin(), pool.end(), [](const Update& a, const Update& b) { return a.client_id < b.client_id; });
  std::vector<Update> sel;
  while (sel.size() < n - 2 * static_cast<std::size_t>(f)) {
    const long nb = std::max(0L, static_cast<long>(pool.size()) - f - 2);
    const std::size_t w = krum_winner(pool, nb);
    sel.push_back(pool[w]);
    pool.erase(pool.begin() + static_cast<long>(w));
  }
  const std::size_t keep = n - 4 * static_cast<std::size_t>(f);
  ParamVector out(sel[0].delta.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    std::vector<double> v;
    for (const Update& s : sel) v.push_back(s.delta[c]);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    const double med = m % 2 ? sorted[m / 2] : (sorted[m / 2 - 1] + sorted[m / 2]) / 2;
    std::vector<std::size_t> ord(sel.size());
    for (std::size_t k = 0; k < ord.size(); ++k) ord[k] = k;
    std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
      const double da = std::fabs(v[a] - med), db = std::fabs(v[b] - med);
      if (da != db) return da < db;
      if (std::fabs(v[a]) != std::fabs(v[b])) return std::fabs(v[a]) < std::fabs(v[b]);
      return sel[a].client_id < sel[b].client_id;
    });
    ord.resize(keep);
    std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return sel[a].client_id < sel[b].client_id; });
    double s = 0;
    for (std::size_t k : ord) s += v[k];
    out[c] = s / static_cast<double>(keep);
  }
  return out;
}

/// All-pairs frontier, returned as a sorted list of input indices.
inline std::vector<std::size_t> frontier(const std::vector<fedhp::search::SolutionPoint>& p, bool defender = true) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].diverged) continue;
    bool dominated = false;
    for (std::size_t j = 0; j < p.size() && !dominated; ++j) {
      if (j == i || p[j].diverged) continue;
      const bool bda_better = defender ? p[j].bda < p[i].bda : p[j].bda > p[i].bda;
      dominated = p[j].mta > p[i].mta && bda_better;
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

struct OlsResult {
  std::vector<double> coef, se, t, p, lo, hi;
  double r2 = 0;
};

/// Normal equations with Eigen and Boost's Student-t.
inline OlsResult ols(const fedhp::eval::Matrix& x, const std::vector<double>& y) {
  const Eigen::Index n = static_cast<Eigen::Index>(x.rows), k = static_cast<Eigen::Index>(x.cols) + 1;
  Eigen::MatrixXd X(n, k);
  Eigen::VectorXd Y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    X(r, 0) = 1.0;
    for (Eigen::Index c = 1; c < k; ++c) X(r, c) = x(static_cast<std::size_t>(r), static_cast<std::size_t>(c - 1));
    Y(r) = y[static_cast<std::size_t>(r)];
  }
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::MatrixXd inv = xtx.inverse();
  const Eigen::VectorXd b = inv * (X.transpose() * Y);
  const Eigen::VectorXd res = Y - X * b;
  const double dof = static_cast<double>(n - k);
  const double sigma2 = res.squaredNorm() / dof;
  boost::math::students_t dist(dof);
  const double q = boost::math::quantile(dist, 0.975);
  OlsResult o;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double se = std::sqrt(sigma2 * inv(j, j));
    const double t = b(j) / se;
    o.coef.push_back(b(j));
    o.se.push_back(se);
    o.t.push_back(t);
    o.p.push_back(2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t))));
    o.lo.push_back(b(j) - q * se);
    o.hi.push_back(b(j) + q * se);
  }
  const double mean = Y.mean();
  o.r2 = 1.0 - res.squaredNorm() / (Y.array() - mean).square().sum();
  return o;
}

/// Central finite-difference gradient of the mean BCE.
inline ParamVector fd_grad(const fedhp::Model& m, const fedhp::Dataset& batch, double h = 1e-5) {
  ParamVector g(m.params().size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    ParamVector p = m.params(), q = m.params();
    p[i] += h;
    q[i] -= h;
    const double lp = fedhp::mean_loss(fedhp::Model(m.architecture(), p), batch);
    const double lq = fedhp::mean_loss(fedhp::Model(m.architecture(), q), batch);
    g[i] = (lp - lq) / (2 * h);
  }
  return g;
}

/// Relative error with an absolute floor near zero.
inline double rel_err(double a, double b, double abs_floor = 1e-7) {
  const double d = std::fabs(a - b);
  if (d <= abs_floor) return 0.0;
  return d / std::max(std::fabs(a), std::fabs(b));
}

inline std::vector<Update> random_updates(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i) * 3 + 1;
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<Update> u;
  for (std::size_t i = 0; i < n; ++i) {
    ParamVector d(dim);
    for (auto& v : d) v = g(rng);
    u.push_back({ids[i], d, 1 + i});
  }
  return u;
}

}  // namespace oracle

#endif  // FEDHP_TESTS_ORACLES_HPP
