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

// Experiment orchestration and artifact emission. Requires OpenSSL (SHA-256)
// and nlohmann/json.

#ifndef FEDHP_HARNESS_HPP
#define FEDHP_HARNESS_HPP

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedhp/analytic.hpp"
#include "fedhp/config.hpp"
#include "fedhp/core.hpp"
#include "fedhp/defense.hpp"
#include "fedhp/engine.hpp"
#include "fedhp/eval.hpp"
#include "fedhp/search.hpp"
#include "fedhp/threat.hpp"

namespace fedhp::harness {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kConfigError = 1, kDivergence = 2, kIoError = 3 };

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string sha256_file(const fs::path& p) { return sha256_hex(read_file(p)); }

inline void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << content;
  if (!out) throw IoError("failed writing " + p.string());
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

inline std::string na_or(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

// ---------------------------------------------------------------------------
// Surface plot data
// ---------------------------------------------------------------------------

/// Writes surface.csv (long form) and surface_matrix.dat (gnuplot `matrix`
/// layout: one line per axis1 value, '#' comment header). Divergent cells are NA.
inline std::vector<std::string> emit_surface_plotdata(const analytic::Surface& s, const fs::path& dir) {
  std::ostringstream csv;
  analytic::write_surface_csv(csv, s);
  write_file(dir / "surface.csv", csv.str());

  std::ostringstream mat;
  mat << "# rows: " << s.axis1.name << " =";
  for (double v : s.axis1.values) mat << ' ' << format_double(v);
  mat << "\n# cols: " << s.axis2.name << " =";
  for (double v : s.axis2.values) mat << ' ' << format_double(v);
  mat << "\n# cell: average malicious loss, NA = diverged\n";
  for (std::size_t i = 0; i < s.axis1.values.size(); ++i) {
    for (std::size_t j = 0; j < s.axis2.values.size(); ++j) {
      const auto& c = s.cell(i, j);
      mat << (j ? " " : "") << (c.diverged ? std::string("NA") : format_double(c.value));
    }
    mat << '\n';
  }
  write_file(dir / "surface_matrix.dat", mat.str());
  return {"surface.csv", "surface_matrix.dat"};
}

/// The analytic surface of an analytic_surface config. Data come from
/// master_seed, the SGD streams from master_seed + 1.
inline analytic::Surface analytic_surface(const config::ExperimentConfig& cfg) {
  analytic::GroupHyper base;
  base.benign = cfg.benign;
  base.malicious = cfg.attack.malicious_sgd;
  base.alpha = cfg.analytic.alpha;
  base.beta = cfg.attack.beta;
  base.sync();
  analytic::AnalyticSetup setup;
  setup.group_size = cfg.analytic.group_size;
  setup.holdout_size = cfg.analytic.holdout_size;
  setup.mixin = cfg.analytic.mixin;
  setup.data_seed = cfg.master_seed;
  setup.sgd_seed = cfg.master_seed + 1;
  return analytic::sweep_surface({cfg.analytic.axis1, cfg.analytic.values1}, {cfg.analytic.axis2, cfg.analytic.values2},
                                 base, cfg.analytic.rounds, Model::dln(2), setup);
}

// ---------------------------------------------------------------------------
// Federation cells
// ---------------------------------------------------------------------------

struct Summary {
  std::optional<eval::PhaseAverages> phases;
  int span = 0;
  int noop_rounds = 0;
  bool diverged = false;
};

inline Summary summarize(const std::vector<fl::RoundLog>& logs, const fl::FederationConfig& f,
                         const eval::MetricConfig& m) {
  Summary s;
  for (const auto& l : logs) s.noop_rounds += l.noop;
  s.diverged = !logs.empty() && s.noop_rounds == static_cast<int>(logs.size());
  if (!logs.empty() && logs.front().round <= f.attack_start && logs.back().round >= f.attack_end) {
    const auto pts = fl::to_points(logs);
    s.phases = eval::phase_averages(pts, f.attack_start, f.attack_end);
    std::vector<double> bda;
    for (const auto& p : pts) bda.push_back(p.bda);
    s.span = eval::span(bda, m, logs.front().round);
  }
  return s;
}

inline search::GreedyResponseTable load_response_table(const config::ExperimentConfig& cfg) {
  if (cfg.adversary.response_table == "published") return search::GreedyResponseTable::published();
  std::ifstream in(cfg.adversary.response_table);
  if (!in) throw IoError("cannot open response table " + cfg.adversary.response_table);
  return search::GreedyResponseTable::read_csv(in);
}

/// Attack configuration with a malicious tuple applied (eta_m absolute).
inline threat::AttackConfig with_malicious(threat::AttackConfig a, const SgdConfig& benign,
                                           const search::HyperTuple& mal) {
  if (!(benign.eta > 0.0)) throw ConfigError("adaptive adversaries need eta_b > 0 to express eta_m as beta * eta_b");
  a.beta = mal.eta / benign.eta;
  a.malicious_sgd.mu = mal.mu;
  a.malicious_sgd.lambda = mal.lambda;
  a.malicious_sgd.epochs = mal.epochs;
  a.malicious_sgd.batch_size = mal.batch_size;
  return a;
}

inline fl::FederationResult run_with(const config::ExperimentConfig& cfg, const SgdConfig& benign,
                                     const threat::AttackConfig& attack, std::uint64_t seed) {
  fl::FederationConfig f = cfg.federation_config();
  f.master_seed = seed;
  return fl::run_federation(f, benign, attack, cfg.defense);
}

/// One benign configuration against the configured adversary.
struct CellOutcome {
  Summary summary;
  threat::AttackConfig attack;
};

inline CellOutcome run_cell(const config::ExperimentConfig& cfg, const SgdConfig& benign, std::uint64_t seed,
                            const search::GreedyResponseTable* table = nullptr) {
  threat::AttackConfig attack = cfg.attack;
  const search::HyperTuple btuple = search::HyperTuple::from_sgd(benign);
  if (cfg.adversary.kind == config::AdversaryKind::greedy) {
    const search::GreedyResponseTable own = table ? search::GreedyResponseTable{} : load_response_table(cfg);
    attack = with_malicious(attack, benign, search::greedy_adapt(btuple, table ? *table : own, cfg.adversary.attack_name));
  } else if (cfg.adversary.kind == config::AdversaryKind::stochastic) {
    search::Nsga2Options opt;
    opt.population = cfg.search.population;
    opt.generations = cfg.search.generations;
    opt.seed = derive_seed(seed, {stream_tag("harness/stochastic")});
    auto evaluate = [&](const search::HyperTuple& mal) {
      const threat::AttackConfig a = with_malicious(cfg.attack, benign, mal);
      const Summary s = summarize(run_with(cfg, benign, a, seed).logs, cfg.federation_config(), cfg.metric_config());
      if (s.diverged || !s.phases) return search::SolutionPoint{mal, 0, 0, true};
      return search::SolutionPoint{mal, s.phases->mta, s.phases->bda, false};
    };
    std::optional<search::ConstraintSpec> cons;
    if (cfg.search.constraint.mta_clean) cons = cfg.search.constraint;
    const auto best = search::stochastic_adversary(cfg.search.malicious, evaluate, opt, cons);
    // No feasible malicious choice: fall back to the configured attack.
    if (best) attack = with_malicious(attack, benign, best->omega);
  }
  const auto res = run_with(cfg, benign, attack, seed);
  return {summarize(res.logs, cfg.federation_config(), cfg.metric_config()), attack};
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
  search::HyperTuple omega;
  std::uint64_t seed = 0;
  Summary summary;
};

inline std::vector<search::HyperTuple> enumerate(const search::SearchSpace& space) {
  std::vector<search::HyperTuple> out;
  search::grid_search(space, [&](const search::HyperTuple& h) {
    out.push_back(h);
    return search::SolutionPoint{h, 0, 0, false};
  });
  return out;
}

inline std::vector<SweepRow> run_sweep(const config::ExperimentConfig& cfg) {
  cfg.sweep.space.validate();
  std::optional<search::GreedyResponseTable> table;
  if (cfg.adversary.kind == config::AdversaryKind::greedy) table = load_response_table(cfg);
  std::vector<SweepRow> rows;
  for (const search::HyperTuple& h : enumerate(cfg.sweep.space))
    for (int s = 0; s < cfg.sweep.seeds; ++s) {
      const std::uint64_t seed = cfg.master_seed + static_cast<std::uint64_t>(s);
      rows.push_back({h, seed, run_cell(cfg, h.to_sgd(), seed, table ? &*table : nullptr).summary});
    }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "eta_b,mu_b,lambda_b,E_b,B_b,seed,mta,bda,mta_star,bda_star,span,noop_rounds,diverged\n";
  for (const SweepRow& r : rows) {
    const auto& p = r.summary.phases;
    os << format_double(r.omega.eta) << ',' << format_double(r.omega.mu) << ',' << format_double(r.omega.lambda) << ','
       << r.omega.epochs << ',' << r.omega.batch_size << ',' << r.seed << ','
       << (p ? format_double(p->mta) : "NA") << ',' << (p ? format_double(p->bda) : "NA") << ','
       << (p ? na_or(p->mta_star) : "NA") << ',' << (p ? na_or(p->bda_star) : "NA") << ',' << r.summary.span << ','
       << r.summary.noop_rounds << ',' << (r.summary.diverged ? 1 : 0) << '\n';
  }
}

inline std::optional<double> response_of(const SweepRow& r, const std::string& response) {
  if (r.summary.diverged || !r.summary.phases) return std::nullopt;
  const auto& p = *r.summary.phases;
  if (response == "bda") return p.bda;
  if (response == "mta") return p.mta;
  if (response == "bda_star") return p.bda_star;
  if (response == "mta_star") return p.mta_star;
  return static_cast<double>(r.summary.span);
}

/// OLS of the chosen response on every benign parameter that varies in the
/// sweep, after normalization.
inline eval::RegressionReport regress_sweep(const std::vector<SweepRow>& rows, const std::string& response) {
  static const std::array<std::string, 5> names{"eta_b", "mu_b", "lambda_b", "E_b", "B_b"};
  std::vector<const SweepRow*> used;
  std::vector<double> y;
  for (const SweepRow& r : rows)
    if (auto v = response_of(r, response)) {
      used.push_back(&r);
      y.push_back(*v);
    }
  std::vector<std::size_t> preds;
  std::vector<std::string> pred_names;
  for (std::size_t p = 0; p < 5; ++p) {
    std::set<double> distinct;
    for (const SweepRow* r : used) distinct.insert(search::get_param(r->omega, p));
    if (distinct.size() > 1) {
      preds.push_back(p);
      pred_names.push_back(names[p]);
    }
  }
  if (preds.empty()) throw ConfigError("regression needs at least one varying benign parameter in [sweep]");
  eval::Matrix x(used.size(), preds.size());
  for (std::size_t r = 0; r < used.size(); ++r)
    for (std::size_t c = 0; c < preds.size(); ++c) x(r, c) = search::get_param(used[r]->omega, preds[c]);
  const eval::Normalized z = eval::normalize(x, pred_names);
  return eval::ols_regress(z.x, y, pred_names);
}

inline void write_regression_csv(std::ostream& os, const eval::RegressionReport& rep) {
  os << "term,coef,std_err,t,p_value,ci_low,ci_high\n";
  for (const auto& r : rep.rows)
    os << r.name << ',' << format_double(r.coef) << ',' << format_double(r.std_err) << ',' << format_double(r.t) << ','
       << format_double(r.p) << ',' << format_double(r.ci_low) << ',' << format_double(r.ci_high) << '\n';
  os << "r_squared," << format_double(rep.r_squared) << ",,,,,\n";
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct RunResult {
  int exit_code = kOk;
  std::string message;
  std::vector<std::string> artifacts;
};

namespace detail {

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_manifest(const fs::path& dir, const config::ExperimentConfig& cfg,
                           const std::vector<std::string>& artifacts, double seconds, const std::string& started) {
  nlohmann::ordered_json j;
  j["tool"] = "fedhp";
  j["version"] = kVersion;
  j["kind"] = std::string(config::to_string(cfg.kind));
  j["master_seed"] = cfg.master_seed;
  j["compiler"] = __VERSION__;
  j["cxx_standard"] = static_cast<long>(__cplusplus);
  j["started_utc"] = started;
  j["wall_time_seconds"] = seconds;
  j["config"] = config::serialize(cfg);
  nlohmann::ordered_json arts = nlohmann::ordered_json::array();
  for (const std::string& a : artifacts) arts.push_back({{"file", a}, {"sha256", sha256_file(dir / a)}});
  j["artifacts"] = arts;
  write_file(dir / "manifest.json", j.dump(2) + "\n");
}

}  // namespace detail

/// Runs one experiment and writes its artifacts plus manifest.json into
/// cfg.output_dir. Data artifacts depend only on the config.
inline RunResult run_experiment(const config::ExperimentConfig& cfg, std::ostream& log = std::cerr) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = detail::utc_now();
  const fs::path dir = cfg.output_dir;
  ensure_dir(dir);

  RunResult res;
  auto emit = [&](const std::string& name, const std::string& body) {
    write_file(dir / name, body);
    res.artifacts.push_back(name);
  };
  emit("config.ini", config::serialize(cfg));

  switch (cfg.kind) {
    case config::ExperimentKind::analytic_surface: {
      const analytic::Surface s = analytic_surface(cfg);
      for (const auto& a : emit_surface_plotdata(s, dir)) res.artifacts.push_back(a);
      const auto div = std::count_if(s.cells.begin(), s.cells.end(), [](const auto& c) { return c.diverged; });
      log << "surface: " << s.cells.size() << " cells, " << div << " diverged\n";
      if (div == static_cast<long>(s.cells.size())) {
        res.exit_code = kDivergence;
        res.message = "every surface cell diverged";
      }
      break;
    }
    case config::ExperimentKind::federation: {
      threat::AttackConfig attack = cfg.attack;
      if (cfg.adversary.kind != config::AdversaryKind::fixed) {
        // Resolve the adaptive choice once, then rerun to keep the full log.
        attack = run_cell(cfg, cfg.benign, cfg.master_seed).attack;
      }
      const auto r = fl::run_federation(cfg.federation_config(), cfg.benign, attack, cfg.defense);
      std::ostringstream rounds;
      fl::write_round_csv(rounds, r.logs);
      emit("rounds.csv", rounds.str());
      const Summary s = summarize(r.logs, cfg.federation_config(), cfg.metric_config());
      std::ostringstream sum;
      sum << "mta,bda,mta_star,bda_star,span,noop_rounds,beta,eta_m_first_round\n";
      double eta_m = 0.0;
      for (const auto& l : r.logs)
        if (l.malicious_eta > 0) {
          eta_m = l.malicious_eta;
          break;
        }
      const auto& p = s.phases;
      sum << (p ? format_double(p->mta) : "NA") << ',' << (p ? format_double(p->bda) : "NA") << ','
          << (p ? na_or(p->mta_star) : "NA") << ',' << (p ? na_or(p->bda_star) : "NA") << ',' << s.span << ','
          << s.noop_rounds << ',' << format_double(attack.beta) << ',' << format_double(eta_m) << '\n';
      emit("summary.csv", sum.str());
      fl::write_checkpoint((dir / "final_model.bin").string(), r.final_model.params());
      res.artifacts.push_back("final_model.bin");
      log << "federation: " << r.logs.size() << " rounds, " << s.noop_rounds << " no-op\n";
      if (s.diverged) {
        res.exit_code = kDivergence;
        res.message = "every round diverged";
      }
      break;
    }
    case config::ExperimentKind::sweep:
    case config::ExperimentKind::regression: {
      const auto rows = run_sweep(cfg);
      std::ostringstream os;
      write_sweep_csv(os, rows);
      emit("sweep.csv", os.str());
      log << "sweep: " << rows.size() << " runs\n";
      if (!rows.empty() && std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.summary.diverged; })) {
        res.exit_code = kDivergence;
        res.message = "every sweep point diverged";
        break;
      }
      if (cfg.kind == config::ExperimentKind::sweep && cfg.sweep.build_response_table) {
        auto pair_eval = [&](const search::HyperTuple& b, const search::HyperTuple& m) {
          const SgdConfig bs = b.to_sgd();
          const Summary s = summarize(run_with(cfg, bs, with_malicious(cfg.attack, bs, m), cfg.master_seed).logs,
                                      cfg.federation_config(), cfg.metric_config());
          if (s.diverged || !s.phases) return search::SolutionPoint{b, 0, 0, true};
          return search::SolutionPoint{b, s.phases->mta, s.phases->bda, false};
        };
        search::HyperTuple mal_base = search::HyperTuple::from_sgd(cfg.attack.malicious_sgd);
        mal_base.eta = cfg.attack.beta * cfg.benign.eta;
        const auto table = search::build_response_table(cfg.adversary.attack_name, cfg.sweep.space, cfg.search.malicious,
                                                        search::HyperTuple::from_sgd(cfg.benign), mal_base, pair_eval);
        std::ostringstream ts;
        table.write_csv(ts);
        emit("response_table.csv", ts.str());
      }
      if (cfg.kind == config::ExperimentKind::regression) {
        const auto rep = regress_sweep(rows, cfg.regression.response);
        std::ostringstream md, csv;
        md << "OLS of " << cfg.regression.response << " on normalized benign hyperparameters\n\n";
        eval::write_markdown(md, rep);
        write_regression_csv(csv, rep);
        emit("regression.md", md.str());
        emit("regression.csv", csv.str());
      }
      break;
    }
    case config::ExperimentKind::frontier: {
      std::optional<search::GreedyResponseTable> table;
      if (cfg.adversary.kind == config::AdversaryKind::greedy) table = load_response_table(cfg);
      std::map<search::HyperTuple, search::SolutionPoint> cache;
      std::size_t runs = 0;
      auto evaluate = [&](const search::HyperTuple& h) {
        auto it = cache.find(h);
        if (it != cache.end()) return it->second;
        ++runs;
        const Summary s = run_cell(cfg, h.to_sgd(), cfg.master_seed, table ? &*table : nullptr).summary;
        search::SolutionPoint p{h, 0, 0, true};
        if (!s.diverged && s.phases) p = {h, s.phases->mta, s.phases->bda, false};
        cache.emplace(h, p);
        return p;
      };
      std::vector<search::SolutionPoint> pool;
      if (cfg.search.method != "nsga2") {
        const auto grid = search::grid_search(cfg.search.benign, evaluate);
        std::ostringstream g, f;
        search::write_points_csv(g, grid);
        search::write_points_csv(f, search::pareto_frontier(grid));
        emit("grid.csv", g.str());
        emit("frontier.csv", f.str());
        pool = grid;
      }
      if (cfg.search.method != "grid") {
        search::Nsga2Options opt;
        opt.population = cfg.search.population;
        opt.generations = cfg.search.generations;
        opt.seed = cfg.master_seed;
        const auto nres = search::nsga2(cfg.search.benign, evaluate, opt);
        std::ostringstream n;
        search::write_points_csv(n, nres.archive);
        emit("nsga2.csv", n.str());
        if (pool.empty()) pool = nres.archive;
      }
      if (cfg.search.constraint.mta_ideal) {
        std::ostringstream c;
        c << "side,eta,mu,lambda,E,B,mta,bda\n";
        const auto best = search::constrained_best(pool, cfg.search.constraint, search::Side::defender);
        if (best)
          c << "defender," << format_double(best->omega.eta) << ',' << format_double(best->omega.mu) << ','
            << format_double(best->omega.lambda) << ',' << best->omega.epochs << ',' << best->omega.batch_size << ','
            << format_double(best->mta) << ',' << format_double(best->bda) << '\n';
        else
          c << "defender,NA,NA,NA,NA,NA,NA,NA\n";
        emit("constrained.csv", c.str());
      }
      log << "frontier: " << runs << " federation runs\n";
      if (std::all_of(pool.begin(), pool.end(), [](const auto& p) { return p.diverged; })) {
        res.exit_code = kDivergence;
        res.message = "every search point diverged";
      }
      break;
    }
  }

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail::write_manifest(dir, cfg, res.artifacts, secs, started);
  return res;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(p));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(config::detail::split(line, ','));
  }
  return rows;
}

inline void print_table(std::ostream& os, const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return;
  std::vector<std::size_t> w;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (w.size() <= c) w.push_back(0);
      w[c] = std::max(w[c], r[c].size());
    }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      os << (c ? "  " : "") << std::setw(static_cast<int>(w[c])) << rows[i][c];
    os << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < w.size(); ++c) total += w[c] + (c ? 2 : 0);
      os << std::string(total, '-') << '\n';
    }
  }
}

inline std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace detail

/// Prints phase averages and Span for the results in `dir`.
inline int report(const fs::path& dir, std::ostream& os) {
  if (!fs::is_directory(dir)) {
    os << "not a results directory: " << dir.string() << '\n';
    return kIoError;
  }
  std::optional<config::ExperimentConfig> cfg;
  if (fs::exists(dir / "config.ini")) cfg = config::load_config((dir / "config.ini").string());
  bool any = false;

  if (fs::exists(dir / "rounds.csv") && cfg) {
    any = true;
    const auto rows = detail::read_csv(dir / "rounds.csv");
    std::vector<fl::RoundLog> logs;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      fl::RoundLog l;
      l.round = static_cast<int>(config::detail::integer("round", rows[i].at(0)));
      l.mta = config::detail::real("mta", rows[i].at(1));
      l.bda = config::detail::real("bda", rows[i].at(2));
      logs.push_back(l);
    }
    const Summary s = summarize(logs, cfg->federation, cfg->metric_config());
    const std::string span_hdr = "Span_" + std::to_string(static_cast<int>(std::lround(cfg->span_threshold * 100)));
    std::vector<std::vector<std::string>> t{{"MTA", "BDA", "MTA*", "BDA*", span_hdr}};
    if (s.phases) {
      const auto& p = *s.phases;
      t.push_back({detail::fmt(p.mta), detail::fmt(p.bda), p.mta_star ? detail::fmt(*p.mta_star) : "NA",
                   p.bda_star ? detail::fmt(*p.bda_star) : "NA", std::to_string(s.span)});
    } else {
      t.push_back({"NA", "NA", "NA", "NA", "NA"});
    }
    os << "Federation (" << logs.size() << " rounds, attack window [" << cfg->federation.attack_start << ", "
       << cfg->federation.attack_end << "])\n";
    detail::print_table(os, t);
  }
  for (const char* name : {"sweep.csv", "frontier.csv", "constrained.csv", "response_table.csv", "summary.csv"}) {
    if (std::string(name) == "summary.csv" && any) continue;
    if (fs::exists(dir / name)) {
      any = true;
      os << '\n' << name << '\n';
      detail::print_table(os, detail::read_csv(dir / name));
    }
  }
  if (fs::exists(dir / "regression.md")) {
    any = true;
    os << '\n' << read_file(dir / "regression.md");
  }
  if (fs::exists(dir / "surface_matrix.dat")) {
    any = true;
    os << "\nsurface_matrix.dat\n" << read_file(dir / "surface_matrix.dat");
  }
  if (!any) {
    os << "no recognizable results in " << dir.string() << '\n';
    return kIoError;
  }
  return kOk;
}

}  // namespace fedhp::harness

#endif  // FEDHP_HARNESS_HPP
