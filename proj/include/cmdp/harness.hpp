#pragma once
// Experiment orchestration.
//
// An experiment = (environment truth) x (agent) x (list of run seeds).  Each
// run is a fully deterministic sequence of K episodes:
//
//   sample context -> realize true MDP -> agent plans -> exact values of the
//   optimal and executed policies (backward induction, not sampled returns)
//   -> noisy rollout -> agent absorbs the trajectory.
//
// Runs for different seeds execute in parallel worker slots and are merged in
// seed order; a (config, seed) pair always reproduces byte-identical CSV
// output.  Metrics: per-window average regret (non-overlapping windows of
// report_window episodes; a partial tail window is dropped), final cumulative
// regret, and epsilon-mistake counts |{k : regret_k >= eps}|.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cmdp/agents.hpp"
#include "cmdp/env.hpp"
#include "cmdp/errors.hpp"

namespace cmdp {

enum class env_preset_kind { benchmark, hard_instance };
enum class agent_kind { glm_orl, glm_rlsvi, oracle, uniform_random };

inline const char* agent_kind_name(agent_kind k) {
  switch (k) {
    case agent_kind::glm_orl:        return "glm-orl";
    case agent_kind::glm_rlsvi:      return "glm-rlsvi";
    case agent_kind::oracle:         return "oracle";
    case agent_kind::uniform_random: return "uniform-random";
  }
  return "?";
}

struct experiment_config {
  env_preset_kind env_kind = env_preset_kind::benchmark;
  env_config env;
  // Benchmark generator parameters.
  double dirichlet_base = 0.4;
  double beta_a = 0.4, beta_b = 0.4;
  double reward_scale = 1.0;
  // Hard-instance parameter.
  double hard_epsilon = 0.1;

  agent_kind kind = agent_kind::glm_orl;
  agent_config agent;
  bool auto_bounds = true;  // fill B, B_p, B_r from the generated truth

  long K = 1;
  std::vector<double> epsilon_list;
  int report_window = 2000;
  std::string output_dir = "out";
  std::vector<std::uint64_t> seeds{0};

  void validate() const {
    env.validate();
    agent.validate();
    require(K >= 1, errc::bad_config, "experiment: K must be at least 1");
    require(report_window >= 1 && report_window <= K, errc::bad_config,
            "experiment: report_window must lie in [1, K]");
    require(!seeds.empty(), errc::bad_config, "experiment: at least one seed required");
  }
};

struct regret_record {
  long k = 0;  // 1-based episode index
  double v_star = 0.0;
  double v_pi = 0.0;
  double regret = 0.0;
  double cum_regret = 0.0;
  std::vector<long> mistakes_cum;  // per epsilon threshold, cumulative
};

struct run_metrics {
  std::vector<double> window_avg;  // mean regret per full window
  double final_cum_regret = 0.0;
  std::vector<long> mistakes;      // per epsilon threshold
};

inline run_metrics compute_metrics(const std::vector<regret_record>& records, int window,
                                   const std::vector<double>& epsilon_list) {
  require(!records.empty(), errc::precondition, "compute_metrics: no records");
  require(window >= 1, errc::precondition, "compute_metrics: window must be positive");
  run_metrics m;
  const std::size_t full = records.size() / std::size_t(window);
  m.window_avg.reserve(full);
  for (std::size_t w = 0; w < full; ++w) {
    double acc = 0.0;
    for (int i = 0; i < window; ++i) acc += records[w * window + i].regret;
    m.window_avg.push_back(acc / double(window));
  }
  m.final_cum_regret = records.back().cum_regret;
  m.mistakes.assign(epsilon_list.size(), 0);
  for (const auto& r : records)
    for (std::size_t e = 0; e < epsilon_list.size(); ++e)
      if (r.regret >= epsilon_list[e]) ++m.mistakes[e];
  return m;
}

// ---------------------------------------------------------------------------
// Truth construction and bound resolution
// ---------------------------------------------------------------------------

inline cmdp_truth build_truth(const experiment_config& cfg) {
  if (cfg.env_kind == env_preset_kind::benchmark)
    return generate_benchmark(cfg.env, cfg.dirichlet_base, cfg.beta_a, cfg.beta_b,
                              cfg.reward_scale);
  return generate_hard_instance(cfg.env.S, cfg.env.A, cfg.env.H, cfg.env.d,
                                cfg.hard_epsilon, cfg.env.link);
}

// Fill the agent's bound parameters from the truth when requested: B is the
// feasible-set Frobenius maximum, B_p the logit-magnitude bound (1 for the
// quadratic link whose predictions live in [0,1]; the realized max row norm
// for logit weights), B_r the realized reward-weight norm bound.
inline agent_config resolve_bounds(const experiment_config& cfg, const cmdp_truth& truth) {
  agent_config a = cfg.agent;
  if (!cfg.auto_bounds) return a;
  const truth_bounds tb = compute_bounds(truth);
  if (cfg.env.link == link_kind::quadratic) {
    a.B_p = 1.0;
    a.B = std::sqrt(double(cfg.env.d));
  } else {
    a.B_p = std::max(tb.B_p, 1e-9);
    a.B = std::sqrt(double(cfg.env.S)) * a.B_p;
  }
  a.B_r = std::max(tb.B_r, 1e-9);
  a.R = 1.0;
  return a;
}

inline std::unique_ptr<agent_base> make_agent(const experiment_config& cfg,
                                              const agent_config& resolved,
                                              const cmdp_truth& truth,
                                              std::uint64_t run_seed) {
  switch (cfg.kind) {
    case agent_kind::oracle:
      return std::make_unique<oracle_agent>(truth);
    case agent_kind::uniform_random:
      return std::make_unique<uniform_agent>(cfg.env.S, cfg.env.A, cfg.env.H,
                                             mix_seed({resolved.seed, run_seed, 2}));
    case agent_kind::glm_orl:
    case agent_kind::glm_rlsvi: {
      agent_config a = resolved;
      a.rlsvi = (cfg.kind == agent_kind::glm_rlsvi);
      a.seed = mix_seed({resolved.seed, run_seed, 2});
      return std::make_unique<glm_agent>(cfg.env.S, cfg.env.A, cfg.env.H, cfg.env.d,
                                         cfg.env.link, a);
    }
  }
  throw error(errc::bad_config, "make_agent: unknown agent kind");
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

inline std::vector<regret_record> run_single(const experiment_config& cfg,
                                             const cmdp_truth& truth,
                                             const agent_config& resolved,
                                             std::uint64_t run_seed) {
  rng env_gen(mix_seed({cfg.env.seed, run_seed, 1}));
  context_sampler sampler(cfg.env);
  auto agent = make_agent(cfg, resolved, truth, run_seed);

  std::vector<regret_record> records;
  records.reserve(std::size_t(cfg.K));
  double cum = 0.0;
  std::vector<long> mistakes(cfg.epsilon_list.size(), 0);
  for (long k = 1; k <= cfg.K; ++k) {
    try {
      const Eigen::VectorXd x = sampler.sample(env_gen);
      const contextual_mdp m = realize_mdp(truth, x);
      const policy_table pi = agent->step(x);
      const value_solution vals = exact_values(m, &pi);
      const auto traj = rollout(m, pi, 0, cfg.env.reward_noise_sigma, env_gen);
      agent->observe(traj);

      regret_record rec;
      rec.k = k;
      rec.v_star = vals.v_star;
      rec.v_pi = *vals.v_pi;
      rec.regret = rec.v_star - rec.v_pi;
      cum += rec.regret;
      rec.cum_regret = cum;
      for (std::size_t e = 0; e < cfg.epsilon_list.size(); ++e)
        if (rec.regret >= cfg.epsilon_list[e]) ++mistakes[e];
      rec.mistakes_cum = mistakes;
      records.push_back(std::move(rec));
    } catch (const error& e) {
      throw error(e.code(), "episode " + std::to_string(k) + ": " + e.what(), e.payload());
    }
  }
  return records;
}

// All seeds, parallel worker slots, results merged in seed order.
inline std::vector<std::vector<regret_record>> run_experiment(const experiment_config& cfg) {
  cfg.validate();
  const cmdp_truth truth = build_truth(cfg);
  const agent_config resolved = resolve_bounds(cfg, truth);

  std::vector<std::vector<regret_record>> all(cfg.seeds.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned slots = unsigned(std::min<std::size_t>({cfg.seeds.size(), hw, 8}));

  if (slots <= 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
      all[i] = run_single(cfg, truth, resolved, cfg.seeds[i]);
    return all;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(slots);
  for (unsigned w = 0; w < slots; ++w)
    workers.emplace_back([&, w] {
      try {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cfg.seeds.size()) return;
          all[i] = run_single(cfg, truth, resolved, cfg.seeds[i]);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return all;
}

// ---------------------------------------------------------------------------
// Config serialization, hashing, emission
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json experiment_config_to_json(const experiment_config& cfg,
                                                const agent_config* resolved = nullptr) {
  nlohmann::json j;
  nlohmann::json je;
  je["kind"] = cfg.env_kind == env_preset_kind::benchmark ? "benchmark" : "hard_instance";
  je["S"] = cfg.env.S; je["A"] = cfg.env.A; je["d"] = cfg.env.d; je["H"] = cfg.env.H;
  je["link"] = link_name(cfg.env.link);
  if (cfg.env.context == context_kind::dirichlet)
    je["context"] = {{"kind", "dirichlet"}, {"concentration", cfg.env.concentration}};
  else
    je["context"] = {{"kind", "indicator_cycle"}};
  je["reward_noise_sigma"] = cfg.env.reward_noise_sigma;
  je["seed"] = cfg.env.seed;
  if (cfg.env_kind == env_preset_kind::benchmark) {
    je["dirichlet_base"] = cfg.dirichlet_base;
    je["beta_reward"] = {cfg.beta_a, cfg.beta_b};
    je["reward_scale"] = cfg.reward_scale;
  } else {
    je["hard_epsilon"] = cfg.hard_epsilon;
  }
  j["env"] = je;

  const agent_config& a = resolved ? *resolved : cfg.agent;
  j["agent"] = {{"kind", agent_kind_name(cfg.kind)},
                {"delta", a.delta},
                {"bonus_scale", a.bonus_scale},
                {"eta", a.eta},
                {"lambda", a.lambda},
                {"B", a.B},
                {"B_p", a.B_p},
                {"B_r", a.B_r},
                {"R", a.R},
                {"seed", a.seed},
                {"rlsvi_literal_variance", a.rlsvi_literal_variance},
                {"tabular_recovery", a.tabular_recovery},
                {"zero_last_row", a.zero_last_row},
                {"auto_bounds", cfg.auto_bounds}};
  j["K"] = cfg.K;
  j["epsilon_list"] = cfg.epsilon_list;
  j["report_window"] = cfg.report_window;
  j["output_dir"] = cfg.output_dir;
  j["seeds"] = cfg.seeds;
  return j;
}

inline experiment_config experiment_config_from_json(const nlohmann::json& j) {
  experiment_config cfg;
  try {
    const auto& je = j.at("env");
    const std::string ek = je.value("kind", "benchmark");
    require(ek == "benchmark" || ek == "hard_instance", errc::bad_config,
            "config: env.kind must be benchmark or hard_instance");
    cfg.env_kind = ek == "benchmark" ? env_preset_kind::benchmark
                                     : env_preset_kind::hard_instance;
    cfg.env.S = je.value("S", 2);
    cfg.env.A = je.value("A", 2);
    cfg.env.d = je.value("d", 1);
    cfg.env.H = je.value("H", 1);
    const std::string lk = je.value("link", "quadratic");
    require(lk == "quadratic" || lk == "multinomial_logit", errc::bad_config,
            "config: env.link must be quadratic or multinomial_logit");
    cfg.env.link = lk == "quadratic" ? link_kind::quadratic : link_kind::multinomial_logit;
    if (je.contains("context")) {
      const auto& jc = je.at("context");
      const std::string ck = jc.value("kind", "dirichlet");
      require(ck == "dirichlet" || ck == "indicator_cycle", errc::bad_config,
              "config: context.kind must be dirichlet or indicator_cycle");
      cfg.env.context = ck == "dirichlet" ? context_kind::dirichlet
                                          : context_kind::indicator_cycle;
      if (cfg.env.context == context_kind::dirichlet) {
        const auto& jconc = jc.at("concentration");
        if (jconc.is_number())
          cfg.env.concentration = env_config::symmetric(cfg.env.d, jconc.get<double>());
        else
          cfg.env.concentration = jconc.get<std::vector<double>>();
      }
    } else {
      cfg.env.context = context_kind::dirichlet;
      cfg.env.concentration = env_config::symmetric(cfg.env.d, 1.0);
    }
    cfg.env.reward_noise_sigma = je.value("reward_noise_sigma", 0.05);
    cfg.env.seed = je.value("seed", std::uint64_t(0));
    cfg.dirichlet_base = je.value("dirichlet_base", 0.4);
    if (je.contains("beta_reward")) {
      const auto br = je.at("beta_reward").get<std::vector<double>>();
      require(br.size() == 2, errc::bad_config, "config: beta_reward must have two entries");
      cfg.beta_a = br[0];
      cfg.beta_b = br[1];
    }
    cfg.reward_scale = je.value("reward_scale", 1.0);
    cfg.hard_epsilon = je.value("hard_epsilon", 0.1);

    const auto& ja = j.at("agent");
    const std::string ak = ja.value("kind", "glm-orl");
    if (ak == "glm-orl") cfg.kind = agent_kind::glm_orl;
    else if (ak == "glm-rlsvi") cfg.kind = agent_kind::glm_rlsvi;
    else if (ak == "oracle") cfg.kind = agent_kind::oracle;
    else if (ak == "uniform-random") cfg.kind = agent_kind::uniform_random;
    else throw error(errc::bad_config, "config: unknown agent.kind '" + ak + "'");
    cfg.agent.delta = ja.value("delta", 0.1);
    cfg.agent.bonus_scale = ja.value("bonus_scale", 1.0);
    cfg.agent.eta = ja.value("eta", 1.0);
    cfg.agent.lambda = ja.value("lambda", 1.0);
    // An explicit flag wins (round-trips of serialized configs); otherwise any
    // hand-supplied bound switches auto-resolution off.
    cfg.auto_bounds = ja.contains("auto_bounds")
                          ? ja.at("auto_bounds").get<bool>()
                          : !(ja.contains("B") || ja.contains("B_p") || ja.contains("B_r"));
    cfg.agent.B = ja.value("B", 1.0);
    cfg.agent.B_p = ja.value("B_p", 1.0);
    cfg.agent.B_r = ja.value("B_r", 1.0);
    cfg.agent.R = ja.value("R", 1.0);
    cfg.agent.seed = ja.value("seed", std::uint64_t(0));
    cfg.agent.rlsvi_literal_variance = ja.value("rlsvi_literal_variance", false);
    cfg.agent.tabular_recovery = ja.value("tabular_recovery", false);
    cfg.agent.zero_last_row = ja.value("zero_last_row", false);

    cfg.K = j.value("K", 1L);
    cfg.epsilon_list = j.value("epsilon_list", std::vector<double>{});
    cfg.report_window = j.value("report_window", int(std::min<long>(2000, cfg.K)));
    cfg.output_dir = j.value("output_dir", std::string("out"));
    cfg.seeds = j.value("seeds", std::vector<std::uint64_t>{0});
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::bad_config, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline std::uint64_t config_hash(const experiment_config& cfg, const agent_config& resolved) {
  return fnv1a64(experiment_config_to_json(cfg, &resolved).dump());
}

struct emitted_files {
  std::vector<std::string> csv_paths;  // one per seed, seed order
  std::string summary_path;
};

inline emitted_files emit_results(const experiment_config& cfg,
                                  const agent_config& resolved,
                                  const std::vector<std::vector<regret_record>>& per_seed,
                                  double wall_clock_ms) {
  namespace fs = std::filesystem;
  emitted_files out;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  require(!ec, errc::io_failure, "emit_results: cannot create '" + cfg.output_dir + "'");
  const std::string tag = hex16(config_hash(cfg, resolved));

  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };

  for (std::size_t i = 0; i < per_seed.size(); ++i) {
    const fs::path p = fs::path(cfg.output_dir) /
                       ("regret_" + tag + "_seed" + std::to_string(cfg.seeds[i]) + ".csv");
    std::ofstream f(p, std::ios::binary);
    require(bool(f), errc::io_failure, "emit_results: cannot open '" + p.string() + "'");
    f << "k,v_star,v_pi,regret,cum_regret\n";
    for (const auto& r : per_seed[i])
      f << r.k << ',' << fmt(r.v_star) << ',' << fmt(r.v_pi) << ',' << fmt(r.regret) << ','
        << fmt(r.cum_regret) << '\n';
    require(bool(f), errc::io_failure, "emit_results: write failed for '" + p.string() + "'");
    out.csv_paths.push_back(p.string());
  }

  nlohmann::json summary;
  summary["config"] = experiment_config_to_json(cfg, &resolved);
  summary["config_hash"] = tag;
  nlohmann::json per = nlohmann::json::array();
  std::vector<double> mean_win;
  for (std::size_t i = 0; i < per_seed.size(); ++i) {
    const run_metrics m = compute_metrics(per_seed[i], cfg.report_window, cfg.epsilon_list);
    nlohmann::json js;
    js["seed"] = cfg.seeds[i];
    js["window_avg_regret"] = m.window_avg;
    js["final_cum_regret"] = m.final_cum_regret;
    js["mistake_counts"] = m.mistakes;
    per.push_back(js);
    if (mean_win.size() < m.window_avg.size()) mean_win.resize(m.window_avg.size(), 0.0);
    for (std::size_t w = 0; w < m.window_avg.size(); ++w) mean_win[w] += m.window_avg[w];
  }
  for (auto& v : mean_win) v /= double(per_seed.size());
  summary["per_seed"] = per;
  summary["mean_window_avg_regret"] = mean_win;
  if (per_seed.size() > 1) {
    std::vector<double> se(mean_win.size(), 0.0);
    for (std::size_t i = 0; i < per_seed.size(); ++i) {
      const run_metrics m = compute_metrics(per_seed[i], cfg.report_window, cfg.epsilon_list);
      for (std::size_t w = 0; w < m.window_avg.size() && w < se.size(); ++w) {
        const double dlt = m.window_avg[w] - mean_win[w];
        se[w] += dlt * dlt;
      }
    }
    for (auto& v : se)
      v = std::sqrt(v / double(per_seed.size() - 1) / double(per_seed.size()));
    summary["se_window_avg_regret"] = se;
  }
  summary["epsilon_list"] = cfg.epsilon_list;
  summary["wall_clock_ms"] = wall_clock_ms;

  const fs::path sp = fs::path(cfg.output_dir) / ("summary_" + tag + ".json");
  std::ofstream sf(sp, std::ios::binary);
  require(bool(sf), errc::io_failure, "emit_results: cannot open '" + sp.string() + "'");
  sf << summary.dump(2) << '\n';
  require(bool(sf), errc::io_failure, "emit_results: write failed for '" + sp.string() + "'");
  out.summary_path = sp.string();
  return out;
}

}  // namespace cmdp
