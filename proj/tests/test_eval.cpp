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

#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <random>
#include <sstream>

#include "fedhp/analytic.hpp"
#include "fedhp/eval.hpp"
#include "oracles.hpp"

using namespace fedhp;
using namespace fedhp::eval;

namespace {

// DLN whose logit is sign * x1, so the class is fixed by the sign of x1.
Model signed_model(double sign) { return Model(Architecture{ModelKind::dln, {2}, Activation::tanh}, {sign, 0, 1, 0}); }

Dataset positive_x1(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) d.push_back({{u(rng), u(rng)}, static_cast<int>(i % 2)});
  return d;
}

std::vector<RoundPoint> series(int first, std::vector<double> m, std::vector<double> b) {
  std::vector<RoundPoint> out;
  for (std::size_t i = 0; i < m.size(); ++i) out.push_back({first + static_cast<int>(i), m[i], b[i]});
  return out;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(n, k);
  for (double& v : x.data) v = g(rng);
  return x;
}

}  // namespace

TEST(Mta, PerfectClassifier) {
  Rng rng(1);
  const Dataset d = analytic::gen_main_dataset(200, rng);
  // x2 > x1 <=> label 1, so w = (-1, 1), v = (1, 1) is exact.
  const Model m(Architecture{ModelKind::dln, {2}, Activation::tanh}, {-1, 1, 1, 1});
  EXPECT_EQ(mta(m, d), 1.0);
}

TEST(Mta, ConstantPredictorOnBalancedSet) { EXPECT_EQ(mta(signed_model(1), positive_x1(100, 2)), 0.5); }

TEST(Mta, MatchesDirectCount) {
  Rng rng(3);
  const Dataset d = analytic::gen_main_dataset(50, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = Model::mlp({2, 4, 1}, Activation::tanh, rng);
    int hits = 0;
    for (const Sample& s : d) hits += (forward(m, s.x) > 0 ? 1 : 0) == s.label;
    EXPECT_EQ(mta(m, d), hits / 50.0);
  }
}

TEST(Mta, EmptySetThrows) { EXPECT_THROW(mta(Model::dln(2), {}), ContractViolation); }

TEST(Bda, ConstantPredictors) {
  const Dataset d = positive_x1(30, 4);
  EXPECT_EQ(bda(signed_model(1), d, 1), 1.0);
  EXPECT_EQ(bda(signed_model(-1), d, 1), 0.0);
  EXPECT_THROW(bda(signed_model(1), {}, 1), ContractViolation);
}

TEST(Bda, MatchesDirectCount) {
  Rng rng(5);
  const Dataset d = analytic::gen_main_dataset(40, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = Model::mlp({2, 4, 1}, Activation::tanh, rng);
    int hits = 0;
    for (const Sample& s : d) hits += forward(m, s.x) > 0;
    EXPECT_EQ(bda(m, d, 1), hits / 40.0);
  }
}

TEST(Span, NeverAboveThreshold) {
  const std::vector<double> b{0.9, 0.9, 0.1, 0.5, 0.2};
  EXPECT_EQ(span(b, MetricConfig{0.5, 2}), 0);
}

TEST(Span, SevenRounds) {
  std::vector<double> b(20, 0.0);
  const int t0 = 5;
  for (int t = t0 + 1; t <= t0 + 7; ++t) b[static_cast<std::size_t>(t - 1)] = 0.9;
  EXPECT_EQ(span(b, MetricConfig{0.5, t0}), 7);
}

TEST(Span, LastExceedanceCounts) {
  // Rounds 11..14 after t0 = 10; gaps are ignored.
  std::vector<double> b(10, 0.0);
  for (double v : {0.6, 0.4, 0.6, 0.4}) b.push_back(v);
  EXPECT_EQ(span(b, MetricConfig{0.5, 10}), 3);
}

TEST(Span, InvariantToValuesBeforeT0) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> b(40);
  for (double& v : b) v = u(rng);
  const int want = span(b, MetricConfig{0.5, 25});
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = 0; i < 25; ++i) b[i] = u(rng);
    EXPECT_EQ(span(b, MetricConfig{0.5, 25}), want);
  }
}

TEST(Span, FirstRoundOffset) {
  const std::vector<double> b{0.9, 0.9, 0.9};
  EXPECT_EQ(span(b, MetricConfig{0.5, 101}, 101), 2);
}

TEST(Phase, ConstantSeries) {
  const auto s = series(1, std::vector<double>(10, 0.3), std::vector<double>(10, 0.3));
  const auto p = phase_averages(s, 3, 6);
  EXPECT_EQ(p.mta, 0.3);
  EXPECT_EQ(p.bda, 0.3);
  EXPECT_EQ(p.mta_star, 0.3);
  EXPECT_EQ(p.bda_star, 0.3);
}

TEST(Phase, WindowCoveringEverythingHasNoStarred) {
  const auto s = series(1, {0.1, 0.2}, {0.3, 0.4});
  const auto p = phase_averages(s, 1, 2);
  EXPECT_FALSE(p.mta_star.has_value());
  EXPECT_FALSE(p.bda_star.has_value());
}

TEST(Phase, TwoPhaseStep) {
  const auto s = series(1, {0.9, 0.9, 0.9, 0.9}, {0.8, 0.8, 0.2, 0.2});
  const auto p = phase_averages(s, 1, 2);
  EXPECT_EQ(p.bda, 0.8);
  EXPECT_EQ(p.bda_star, 0.2);
}

TEST(Phase, WindowOutsideLogThrows) {
  const auto s = series(5, {0.1, 0.2}, {0.3, 0.4});
  EXPECT_THROW(phase_averages(s, 4, 5), ContractViolation);
  EXPECT_THROW(phase_averages(s, 6, 5), ContractViolation);
}

TEST(Phase, ConcatenationIsLengthWeighted) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> m(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) {
      m[i] = u(rng);
      b[i] = u(rng);
    }
    const auto all = series(1, m, b);
    // Window [5, 12]; split the log at round 9 (inside the window) and 20 (post).
    const std::vector<RoundPoint> a(all.begin(), all.begin() + 9), rest(all.begin() + 9, all.end());
    const auto pa = phase_averages(a, 5, 9);  // rounds 5..9 of the window
    const auto pr = phase_averages(rest, 10, 12);
    const auto whole = phase_averages(all, 5, 12);
    EXPECT_NEAR(whole.mta, (5 * pa.mta + 3 * pr.mta) / 8, 1e-14);
    EXPECT_NEAR(whole.bda, (5 * pa.bda + 3 * pr.bda) / 8, 1e-14);
    EXPECT_NEAR(*whole.bda_star, *pr.bda_star, 1e-14);
  }
}

TEST(StudentT, MatchesBoost) {
  for (double dof : {1.0, 2.5, 5.0, 30.0, 300.0}) {
    boost::math::students_t dist(dof);
    for (double t : {-40.0, -3.0, -0.5, 0.0, 0.7, 2.0, 12.0}) {
      EXPECT_NEAR(student_t_cdf(t, dof), boost::math::cdf(dist, t), 1e-10) << dof << " " << t;
      EXPECT_NEAR(student_t_two_sided_p(t, dof), 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t))),
                  1e-10);
    }
    for (double p : {0.025, 0.5, 0.975, 0.999})
      EXPECT_NEAR(student_t_quantile(p, dof), boost::math::quantile(dist, p), 1e-8 * std::max(1.0, std::abs(boost::math::quantile(dist, p))));
  }
}

TEST(Ols, MatchesNormalEquationsOracle) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + static_cast<std::size_t>(trial), k = 1 + static_cast<std::size_t>(trial % 5);
    const Matrix x = random_matrix(rng, n, k);
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
      y[r] = 0.5 + g(rng);
      for (std::size_t c = 0; c < k; ++c) y[r] += (static_cast<double>(c) - 1.0) * x(r, c);
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) names.push_back("x" + std::to_string(c));
    const RegressionReport rep = ols_regress(x, y, names);
    const oracle::OlsResult o = oracle::ols(x, y);
    ASSERT_EQ(rep.rows.size(), k + 1);
    EXPECT_EQ(rep.rows[0].name, "const");
    EXPECT_NEAR(rep.r_squared, o.r2, 1e-8);
    for (std::size_t j = 0; j <= k; ++j) {
      const CoefficientRow& r = rep.rows[j];
      EXPECT_NEAR(r.coef, o.coef[j], 1e-8);
      EXPECT_NEAR(r.std_err, o.se[j], 1e-8);
      EXPECT_NEAR(r.t, o.t[j], 1e-8 * std::max(1.0, std::abs(o.t[j])));
      EXPECT_NEAR(r.p, o.p[j], 1e-8);
      EXPECT_NEAR(r.ci_low, o.lo[j], 1e-8);
      EXPECT_NEAR(r.ci_high, o.hi[j], 1e-8);
      EXPECT_LE(r.ci_low, r.coef);
      EXPECT_GE(r.ci_high, r.coef);
    }
  }
}

TEST(Ols, NoiselessRecovery) {
  std::mt19937_64 rng(9);
  const Matrix x = random_matrix(rng, 30, 2);
  std::vector<double> y(30);
  for (std::size_t r = 0; r < 30; ++r) y[r] = 2 * x(r, 0) - 3 * x(r, 1) + 1;
  const auto rep = ols_regress(x, y, {"x1", "x2"});
  EXPECT_NEAR(rep.rows[0].coef, 1.0, 1e-8);
  EXPECT_NEAR(rep.rows[1].coef, 2.0, 1e-8);
  EXPECT_NEAR(rep.rows[2].coef, -3.0, 1e-8);
  EXPECT_NEAR(rep.r_squared, 1.0, 1e-8);
}

TEST(Ols, NullPValuesRarelySmall) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 1.0);
  int ok = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const Matrix x = random_matrix(rng, 200, 3);
    std::vector<double> y(200);
    for (double& v : y) v = g(rng);
    const auto rep = ols_regress(x, y, {"a", "b", "c"});
    bool all = true;
    for (std::size_t j = 1; j < rep.rows.size(); ++j) all = all && rep.rows[j].p > 0.01;
    ok += all;
  }
  EXPECT_GE(ok, 0.95 * trials);
}

TEST(Ols, AffineRescaleInvariantAfterNormalization) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  const Matrix x = random_matrix(rng, 40, 3);
  std::vector<double> y(40);
  for (std::size_t r = 0; r < 40; ++r) y[r] = x(r, 0) - 0.5 * x(r, 2) + g(rng);
  Matrix scaled = x;
  for (std::size_t r = 0; r < 40; ++r) scaled(r, 1) = -7.5 * x(r, 1) + 123.0;
  const std::vector<std::string> names{"a", "b", "c"};
  const auto r1 = ols_regress(normalize(x, names).x, y, names);
  const auto r2 = ols_regress(normalize(scaled, names).x, y, names);
  for (std::size_t j = 0; j < 4; ++j) {
    // A negative scale flips the sign of that predictor's coefficient and t.
    const double sign = j == 2 ? -1.0 : 1.0;
    EXPECT_NEAR(r2.rows[j].t, sign * r1.rows[j].t, 1e-9);
    EXPECT_NEAR(r2.rows[j].p, r1.rows[j].p, 1e-9);
  }
}

TEST(Ols, CollinearPredictorIsNamed) {
  std::mt19937_64 rng(12);
  Matrix x = random_matrix(rng, 20, 3);
  for (std::size_t r = 0; r < 20; ++r) x(r, 2) = 2 * x(r, 0) - x(r, 1);
  std::vector<double> y(20, 1.0);
  y[0] = 2;
  try {
    ols_regress(x, y, {"eta", "mu", "E"});
    FAIL();
  } catch (const SingularityError& e) {
    EXPECT_EQ(e.predictor(), "E");
  }
}

TEST(Ols, ConstantPredictorNamedByNormalize) {
  Matrix x(10, 2);
  for (std::size_t r = 0; r < 10; ++r) {
    x(r, 0) = static_cast<double>(r);
    x(r, 1) = 4.0;
  }
  try {
    normalize(x, {"eta", "B"});
    FAIL();
  } catch (const SingularityError& e) {
    EXPECT_EQ(e.predictor(), "B");
  }
}

TEST(Ols, MarkdownLayout) {
  std::mt19937_64 rng(13);
  const Matrix x = random_matrix(rng, 12, 1);
  std::vector<double> y(12);
  for (std::size_t r = 0; r < 12; ++r) y[r] = x(r, 0) + 0.1 * static_cast<double>(r % 3);
  std::ostringstream os;
  write_markdown(os, ols_regress(x, y, {"eta_b"}));
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "| | coef | std err | t | P>\\|t\\| | [0.025 | 0.975] |");
  EXPECT_NE(s.find("| const |"), std::string::npos);
  EXPECT_NE(s.find("| eta_b |"), std::string::npos);
  EXPECT_NE(s.find("R-squared"), std::string::npos);
}
