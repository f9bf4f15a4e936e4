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

#include <random>

#include "fedhp/analytic.hpp"

using namespace fedhp;
using namespace fedhp::analytic;

namespace {

GroupHyper plain(double eta, double alpha, double beta, int batch) {
  GroupHyper h;
  h.benign = SgdConfig{eta, 0.0, 0.0, 1, batch};
  h.malicious = h.benign;
  h.alpha = alpha;
  h.beta = beta;
  h.sync();
  return h;
}

ParamVector random_theta(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ParamVector p(4);
  for (auto& v : p) v = g(rng);
  return p;
}

}  // namespace

TEST(Data, MainLabels) {
  EXPECT_EQ(main_label(0.3, 0.3), 0);
  EXPECT_EQ(main_label(-0.5, 0.5), 1);
}

TEST(Data, MainClassBalance) {
  Rng rng(1);
  const Dataset d = gen_main_dataset(100000, rng);
  double ones = 0;
  for (const Sample& s : d) {
    ones += s.label;
    ASSERT_GE(s.x[0], -1.0);
    ASSERT_LE(s.x[1], 1.0);
  }
  EXPECT_NEAR(ones / 1e5, 0.5, 0.01);
}

TEST(Data, BackdoorRegion) {
  Rng rng(2);
  const Dataset d = gen_backdoor_dataset(100000, rng);
  double mean = 0;
  for (const Sample& s : d) {
    ASSERT_LE(0.0, s.x[1]);
    ASSERT_LE(s.x[1], s.x[0]);
    ASSERT_LE(s.x[0], 1.0);
    ASSERT_EQ(s.label, 1);
    ASSERT_EQ(main_label(s.x[0], s.x[1]), 0);
    mean += s.x[0];
  }
  EXPECT_NEAR(mean / 1e5, 0.5, 0.01);
}

TEST(GroupHyperTest, AlphaBound) {
  GroupHyper h = default_group_hyper();
  h.alpha = 0.7;
  EXPECT_THROW(h.validate(), ConfigError);
  h.alpha = 0.5;
  EXPECT_NO_THROW(h.validate());
  h.malicious.eta = 0.3;
  EXPECT_THROW(h.validate(), ConfigError);
}

TEST(SimulateRound, AlphaZeroIsBenignTraining) {
  const GroupData data = make_group_data({});
  GroupHyper h = default_group_hyper();
  h.alpha = 0.0;
  const Model m = Model::dln(2);
  Rng rb(5), rm(6), replay(5);
  const auto next = simulate_round(m.architecture(), initial_state(m), h, data.benign, data.malicious, rb, rm);
  ParamVector want = m.params();
  want += local_train(m, data.benign, h.benign, replay);
  EXPECT_EQ(next.theta, want);
  EXPECT_EQ(next.round, 1);
}

TEST(SimulateRound, IdenticalGroupsIgnoreAlpha) {
  const GroupData data = make_group_data({});
  const Model m = Model::dln(2);
  for (double alpha : {0.0, 0.2, 0.5}) {
    GroupHyper h = default_group_hyper();
    h.alpha = alpha;
    Rng rb(5), rm(5);
    const auto next = simulate_round(m.architecture(), initial_state(m), h, data.benign, data.benign, rb, rm);
    Rng replay(5);
    ParamVector want = m.params();
    want += local_train(m, data.benign, h.benign, replay);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(next.theta[i], want[i], 1e-15);
  }
}

TEST(SimulateRound, FullBatchStepExpansion) {
  const GroupData data = make_group_data({});
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const double alpha = 0.5 * (trial % 11) / 10.0, beta = 0.5 + trial % 7;
    const GroupHyper h = plain(0.05 + 0.01 * (trial % 5), alpha, beta, 512);
    const Model m(Architecture{ModelKind::dln, {2}, Activation::tanh}, random_theta(rng));
    Rng rb(1), rm(2);
    const auto next = simulate_round(m.architecture(), initial_state(m), h, data.benign, data.malicious, rb, rm);
    const auto gb = loss_and_grad(m, data.benign).grad;
    const auto gm = loss_and_grad(m, data.malicious).grad;
    for (std::size_t i = 0; i < 4; ++i) {
      const double want = m.params()[i] - h.benign.eta * ((1 - alpha) * gb[i] + alpha * beta * gm[i]);
      ASSERT_NEAR(next.theta[i], want, 1e-10);
    }
  }
}

TEST(SimulateRound, GroupSwapSymmetry) {
  const GroupData data = make_group_data({});
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Model m(Architecture{ModelKind::dln, {2}, Activation::tanh}, random_theta(rng));
    GroupHyper h = default_group_hyper();
    h.alpha = 0.3;
    h.malicious.epochs = 3;
    h.malicious.batch_size = 32;
    h.beta = 2.0;
    h.sync();
    GroupHyper s;
    s.benign = h.malicious;
    s.malicious = h.benign;
    s.alpha = 1 - h.alpha;  // outside the validated range, so compare arithmetic directly
    Rng rb(1), rm(2), rb2(2), rm2(1);
    const Architecture& a = m.architecture();
    const ParamVector db = local_train(m, data.benign, h.benign, rb);
    const ParamVector dm = local_train(m, data.malicious, h.malicious, rm);
    const ParamVector db2 = local_train(m, data.malicious, s.benign, rb2);
    const ParamVector dm2 = local_train(m, data.benign, s.malicious, rm2);
    Rng rb3(1), rm3(2);
    const auto next = simulate_round(a, initial_state(m), h, data.benign, data.malicious, rb3, rm3);
    for (std::size_t i = 0; i < 4; ++i) {
      const double swapped = m.params()[i] + (1 - s.alpha) * db2[i] + s.alpha * dm2[i];
      EXPECT_NEAR(next.theta[i], swapped, 1e-14);
      EXPECT_NEAR(next.theta[i], m.params()[i] + 0.7 * db[i] + 0.3 * dm[i], 1e-15);
    }
  }
}

TEST(SimulateRound, NonZeroVelocityRejected) {
  const GroupData data = make_group_data({});
  const Model m = Model::dln(2);
  auto st = initial_state(m);
  st.v_b.v[0] = 1.0;
  Rng rb(1), rm(2);
  EXPECT_THROW(simulate_round(m.architecture(), st, default_group_hyper(), data.benign, data.malicious, rb, rm),
               ContractViolation);
}

TEST(AvgMaliciousLoss, FrozenDynamics) {
  GroupHyper h = default_group_hyper();
  h.benign.eta = 0.0;
  h.sync();
  const Model m = Model::dln(2);
  const AnalyticSetup setup;
  const auto r = avg_malicious_loss(h, 20, m, setup);
  ASSERT_FALSE(r.diverged);
  EXPECT_DOUBLE_EQ(r.value, mean_loss(m, make_group_data(setup).holdout));
}

TEST(AvgMaliciousLoss, Deterministic) {
  const auto a = avg_malicious_loss(default_group_hyper(), 30, Model::dln(2), AnalyticSetup{});
  const auto b = avg_malicious_loss(default_group_hyper(), 30, Model::dln(2), AnalyticSetup{});
  EXPECT_EQ(a, b);
}

TEST(AvgMaliciousLoss, BenignOnlyAboveHeavyAttack) {
  GroupHyper benign = default_group_hyper();
  benign.alpha = 0.0;
  GroupHyper heavy = default_group_hyper();
  heavy.alpha = 0.5;
  heavy.beta = 10.0;
  heavy.sync();
  const auto a = avg_malicious_loss(benign, 200, Model::dln(2), AnalyticSetup{});
  const auto b = avg_malicious_loss(heavy, 200, Model::dln(2), AnalyticSetup{});
  ASSERT_FALSE(a.diverged);
  ASSERT_FALSE(b.diverged);
  EXPECT_GT(a.value, b.value);
}

TEST(AvgMaliciousLoss, DivergenceIsMarked) {
  GroupHyper h = default_group_hyper();
  h.benign.eta = 50.0;
  h.beta = 20.0;
  h.sync();
  EXPECT_TRUE(avg_malicious_loss(h, 50, Model::dln(2), AnalyticSetup{}).diverged);
}

TEST(Surface, SingleCellMatchesDirectCall) {
  const AnalyticSetup setup;
  GroupHyper base = default_group_hyper();
  const Surface s = sweep_surface({"eta_b", {0.2}}, {"beta", {4}}, base, 25, Model::dln(2), setup);
  ASSERT_EQ(s.cells.size(), 1u);
  base.benign.eta = 0.2;
  base.beta = 4;
  base.sync();
  EXPECT_EQ(s.cell(0, 0), avg_malicious_loss(base, 25, Model::dln(2), make_group_data(setup), cell_seed(setup.sgd_seed, 0, 0)));
}

TEST(Surface, UnknownAxisIsConfigError) {
  EXPECT_THROW(sweep_surface({"gamma", {1}}, {"beta", {1}}, default_group_hyper(), 1, Model::dln(2), {}), ConfigError);
}

TEST(Surface, CellsIndependentOfGridShape) {
  // A cell's value depends on its coordinates and values, not on its neighbours.
  const AnalyticSetup setup;
  const Surface big = sweep_surface({"eta_b", {0.05, 0.1}}, {"beta", {1, 2}}, default_group_hyper(), 10, Model::dln(2), setup);
  const Surface small = sweep_surface({"eta_b", {0.05}}, {"beta", {1}}, default_group_hyper(), 10, Model::dln(2), setup);
  EXPECT_EQ(big.cell(0, 0), small.cell(0, 0));
}

TEST(Surface, CsvHasOneRowPerCellAndNaForDivergence) {
  Surface s{{"eta_b", {0.1, 0.2}}, {"beta", {1}}, {{1.5, false}, {0.0, true}}};
  std::ostringstream os;
  write_surface_csv(os, s);
  EXPECT_EQ(os.str(), "axis1_value,axis2_value,avg_malicious_loss,diverged_flag\n0.1,1,1.5,0\n0.2,1,NA,1\n");
}
