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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fedhp/engine.hpp"

using namespace fedhp;
using namespace fedhp::fl;

namespace {

FederationConfig small_cfg(int rounds = 30) {
  FederationConfig c;
  c.rounds_total = rounds;
  c.attack_start = 11;
  c.attack_end = 20;
  c.train_size = 2000;
  c.test_size = 500;
  c.threads = 1;
  return c;
}

std::string csv(const std::vector<RoundLog>& logs) {
  std::ostringstream os;
  write_round_csv(os, logs);
  return os.str();
}

Dataset balanced(std::size_t n) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) d.push_back({{u(rng), u(rng)}, static_cast<int>(i % 2)});
  return d;
}

}  // namespace

TEST(Partition, SingleClientGetsEverything) {
  const Dataset d = balanced(100);
  Rng rng(2);
  const auto p = dirichlet_partition(d, 1, 0.9, rng);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].size(), 100u);
}

TEST(Partition, ExhaustiveAndDisjointOver100Seeds) {
  Dataset d = balanced(1000);
  for (std::size_t i = 0; i < d.size(); ++i) d[i].x[0] = static_cast<double>(i);  // unique tag
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto p = dirichlet_partition(d, 20, 0.9, rng);
    std::set<double> seen;
    std::size_t total = 0;
    for (const auto& part : p) {
      EXPECT_FALSE(part.empty());
      total += part.size();
      for (const Sample& s : part) EXPECT_TRUE(seen.insert(s.x[0]).second);
    }
    EXPECT_EQ(total, d.size());
  }
}

TEST(Partition, HugeConcentrationIsNearUniform) {
  const Dataset d = balanced(10000);
  Rng rng(3);
  const auto p = dirichlet_partition(d, 10, 1e6, rng);
  for (const auto& part : p) {
    double ones = 0;
    for (const Sample& s : part) ones += s.label;
    EXPECT_NEAR(ones / static_cast<double>(part.size()), 0.5, 0.05);
  }
}

TEST(Partition, ImpossibleSplitIsConfigError) {
  // 12 samples over 11 clients with a tiny concentration: someone stays empty.
  const Dataset d = balanced(12);
  Rng rng(4);
  EXPECT_THROW(dirichlet_partition(d, 11, 1e-3, rng), ConfigError);
}

TEST(Schedule, Examples) {
  EXPECT_EQ(lr_at_round(0.1, 0.999, 0), 0.1);
  EXPECT_EQ(lr_at_round(0.1, 1.0, 500), 0.1);
  EXPECT_NEAR(lr_at_round(0.15, 0.999, 100), 0.135719, 1e-6);
  EXPECT_NEAR(lr_at_round(0.15, 0.999, 100), 0.15 * std::exp(100 * std::log(0.999)), 1e-15);
}

TEST(Selection, AllWhenMEqualsN) {
  EXPECT_EQ(select_clients(5, 5, 17, 3), (std::vector<int>{0, 1, 2, 3, 4}));
}

TEST(Selection, Deterministic) { EXPECT_EQ(select_clients(100, 10, 7, 42), select_clients(100, 10, 7, 42)); }

TEST(Selection, UniformFrequency) {
  std::vector<int> hits(100, 0);
  for (int t = 1; t <= 10000; ++t)
    for (int id : select_clients(100, 10, t, 9)) ++hits[static_cast<std::size_t>(id)];
  // 10% +- 1% of 10^4 rounds, compared in integer counts.
  for (int h : hits) {
    EXPECT_GE(h, 900);
    EXPECT_LE(h, 1100);
  }
}

TEST(Config, GammaFloorDependsOnEpochs) {
  FederationConfig c;
  SgdConfig b;
  b.epochs = 1;
  c.lr_decay_gamma = 0.4;
  EXPECT_THROW(c.validate(b), ConfigError);
  c.lr_decay_gamma = 0.6;
  EXPECT_NO_THROW(c.validate(b));
  c.malicious_fraction = 0.6;
  EXPECT_THROW(c.validate(b), ConfigError);
}

TEST(Round, SingleClientIsLocalTraining) {
  // N = M = 1 with FedAvg: the round is exactly one local_train call.
  FederationConfig c = small_cfg();
  c.n_clients = 1;
  c.clients_per_round = 1;
  c.malicious_fraction = 0.0;
  Rng rng(5);
  Federation fed{c, SgdConfig{0.1, 0.9, 5e-4, 2, 32}, {}, {}, analytic::gen_main_dataset(50, rng), {}};
  fed.backdoor_set = threat::backdoor_set(fed.test_set, fed.attack);
  fed.clients.push_back({0, analytic::gen_main_dataset(256, rng), false});
  Model global = initial_model(c);
  const Model start = global;
  defense::Aggregator agg;
  run_round(global, fed, agg, 1);
  Rng crng = client_rng(c.master_seed, 0, 1);
  ParamVector want = start.params();
  want += local_train(start, fed.clients[0].data, fed.benign, crng);
  EXPECT_EQ(global.params(), want);
}

TEST(Federation, NoAttackersMeansAttackIrrelevant) {
  FederationConfig c = small_cfg();
  c.malicious_fraction = 0.0;
  threat::AttackConfig strong;
  strong.beta = 5.0;
  strong.poison_fraction = 1.0;
  const auto a = run_federation(c, SgdConfig{}, {}, {});
  const auto b = run_federation(c, SgdConfig{}, strong, {});
  EXPECT_EQ(a.final_model.params(), b.final_model.params());
  for (std::size_t t = 0; t < a.logs.size(); ++t) EXPECT_EQ(a.logs[t].mta, b.logs[t].mta);
}

TEST(Federation, OutsideWindowAttackersAreBenign) {
  // Before the window the trajectory cannot depend on attack settings or on
  // which clients are corrupted, so compare against an all-benign run.
  FederationConfig c = small_cfg(10);
  FederationConfig clean = c;
  clean.malicious_fraction = 0.0;
  const auto a = run_federation(c, SgdConfig{}, {}, {});
  const auto b = run_federation(clean, SgdConfig{}, {}, {});
  EXPECT_EQ(a.final_model.params(), b.final_model.params());
}

TEST(Federation, Deterministic) {
  const FederationConfig c = small_cfg();
  EXPECT_EQ(csv(run_federation(c, SgdConfig{}, {}, {}).logs), csv(run_federation(c, SgdConfig{}, {}, {}).logs));
}

TEST(Federation, ThreadCountDoesNotMatter) {
  FederationConfig c = small_cfg(15);
  FederationConfig t = c;
  t.threads = 3;
  EXPECT_EQ(csv(run_federation(c, SgdConfig{}, {}, {}).logs), csv(run_federation(t, SgdConfig{}, {}, {}).logs));
}

TEST(Federation, ZeroRounds) {
  FederationConfig c = small_cfg(0);
  const auto r = run_federation(c, SgdConfig{}, {}, {});
  EXPECT_TRUE(r.logs.empty());
  EXPECT_EQ(r.final_model.params(), r.initial.params());
}

TEST(Federation, BoundBelowClientsPerRoundIsConfigError) {
  FederationConfig c = small_cfg(1);
  c.clients_per_round = 5;
  EXPECT_THROW(run_federation(c, SgdConfig{}, {}, {defense::AggregatorKind::bulyan, 1, std::nullopt}), ConfigError);
}

TEST(Federation, LogShape) {
  const auto r = run_federation(small_cfg(5), SgdConfig{}, {}, {});
  ASSERT_EQ(r.logs.size(), 5u);
  for (const auto& l : r.logs) {
    EXPECT_EQ(l.selected.size(), 5u);
    EXPECT_GE(l.mta, 0.0);
    EXPECT_LE(l.bda, 1.0);
  }
  const std::string text = csv(r.logs);
  EXPECT_EQ(text.substr(0, text.find('\n')), "round,mta,bda,selected_ids,n_diverged");
}

TEST(Federation, BenignOnlyLearnsTheTask) {
  FederationConfig c;
  c.rounds_total = 200;
  c.malicious_fraction = 0.0;
  c.threads = 1;
  const auto r = run_federation(c, SgdConfig{}, {}, {});
  EXPECT_GE(r.logs.back().mta, 0.95);
}

TEST(Federation, AttackEfficacyAndPreAttackBaseline) {
  FederationConfig c;
  c.threads = 1;
  const auto r = run_federation(c, SgdConfig{}, {}, {});
  const auto pts = to_points(r.logs);
  double pre = 0;
  for (int t = 0; t < c.attack_start - 1; ++t) pre += pts[static_cast<std::size_t>(t)].bda;
  pre /= c.attack_start - 1;
  // Stamped x1 = 2 never satisfies x2 > x1, so the clean-label baseline is 0.
  EXPECT_NEAR(pre, 0.0, 0.03);
  const auto ph = eval::phase_averages(pts, c.attack_start, c.attack_end);
  EXPECT_GE(ph.bda - pre, 0.20);
}

TEST(Federation, BetaCouplingOnLoggedRate) {
  FederationConfig c = small_cfg(14);
  threat::AttackConfig a;
  a.beta = 2.0;
  const auto r1 = run_federation(c, SgdConfig{0.05, 0.9, 5e-4, 2, 64}, a, {});
  const auto r2 = run_federation(c, SgdConfig{0.10, 0.9, 5e-4, 2, 64}, a, {});
  int checked = 0;
  for (std::size_t t = 0; t < r1.logs.size(); ++t) {
    if (r1.logs[t].malicious_eta == 0.0) continue;
    EXPECT_DOUBLE_EQ(r1.logs[t].malicious_eta, 2.0 * r1.logs[t].benign_eta);
    EXPECT_DOUBLE_EQ(r2.logs[t].malicious_eta, 2.0 * r1.logs[t].malicious_eta);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Federation, DivergedClientsDroppedAndRoundsFlagged) {
  FederationConfig c = small_cfg(3);
  c.malicious_fraction = 0.0;
  // Weight decay of 1e200 overflows the parameters within two steps.
  const auto r = run_federation(c, SgdConfig{1.0, 0.0, 1e200, 5, 16}, {}, {});
  for (const auto& l : r.logs) {
    EXPECT_TRUE(l.noop);
    EXPECT_EQ(l.diverged.size(), 5u);
  }
  EXPECT_EQ(r.final_model.params(), r.initial.params());
}

TEST(Checkpoint, RoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "fedhp_ckpt_test.bin").string();
  const ParamVector p{1.5, -0.0, 3e-300, -7.25};
  write_checkpoint(path, p);
  EXPECT_EQ(read_checkpoint(path), p);
  EXPECT_EQ(std::filesystem::file_size(path), 16u + 8u * p.size());
  std::ofstream(path, std::ios::binary) << "nope";
  EXPECT_THROW(read_checkpoint(path), IoError);
  std::remove(path.c_str());
}
