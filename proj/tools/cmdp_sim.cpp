// Command-line front end: run experiments, generate environment truths,
// inspect checkpoint/truth files.  All failures exit nonzero with a
// machine-readable JSON error record on stderr.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmdp/harness.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
  std::ifstream f(path);
  cmdp::require(bool(f), cmdp::errc::io_failure, "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw cmdp::error(cmdp::errc::io_failure, "cannot parse '" + path + "': " + e.what());
  }
  return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::binary);
  cmdp::require(bool(f), cmdp::errc::io_failure, "cannot open '" + path + "' for writing");
  f << j.dump(2) << '\n';
  cmdp::require(bool(f), cmdp::errc::io_failure, "write failed for '" + path + "'");
}

int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds,
            const std::string& out_dir) {
  cmdp::experiment_config cfg = cmdp::experiment_config_from_json(load_json(config_path));
  if (!seeds.empty()) cfg.seeds = seeds;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  cfg.validate();

  const auto t0 = std::chrono::steady_clock::now();
  const cmdp::cmdp_truth truth = cmdp::build_truth(cfg);
  const cmdp::agent_config resolved = cmdp::resolve_bounds(cfg, truth);
  const auto per_seed = cmdp::run_experiment(cfg);
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0).count();
  const cmdp::emitted_files files = cmdp::emit_results(cfg, resolved, per_seed, ms);

  for (const auto& p : files.csv_paths) std::cout << "wrote " << p << '\n';
  std::cout << "wrote " << files.summary_path << '\n';
  for (std::size_t i = 0; i < per_seed.size(); ++i) {
    const cmdp::run_metrics m =
        cmdp::compute_metrics(per_seed[i], cfg.report_window, cfg.epsilon_list);
    std::cout << "seed " << cfg.seeds[i] << ": final cumulative regret "
              << m.final_cum_regret << "; window averages:";
    for (double w : m.window_avg) {
      char buf[32];
      std::snprintf(buf, sizeof buf, " %.4f", w);
      std::cout << buf;
    }
    std::cout << '\n';
  }
  std::cout << "wall clock " << long(ms) << " ms\n";
  return 0;
}

int cmd_gen_env(const std::string& preset, const std::string& out_path) {
  cmdp::cmdp_truth truth;
  if (preset == "benchmark" || preset == "appendix-f") {
    cmdp::env_config env;
    env.S = 10; env.A = 10; env.d = 5; env.H = 6;
    env.link = cmdp::link_kind::quadratic;
    env.context = cmdp::context_kind::dirichlet;
    env.concentration = cmdp::env_config::symmetric(5, 0.35);
    env.reward_noise_sigma = 0.05;
    env.seed = 11;
    truth = cmdp::generate_benchmark(env, 0.4, 0.4, 0.4, 3.0 / 7.0);
  } else if (preset == "hard-instance") {
    truth = cmdp::generate_hard_instance(2, 5, 5, 5, 0.1,
                                         cmdp::link_kind::multinomial_logit);
  } else {
    throw cmdp::error(cmdp::errc::bad_config,
                      "unknown preset '" + preset +
                          "' (expected benchmark, appendix-f, or hard-instance)");
  }
  write_json(out_path, cmdp::truth_to_json(truth));
  std::cout << "wrote " << out_path << '\n';
  return 0;
}

int cmd_inspect(const std::string& path) {
  const nlohmann::json j = load_json(path);
  const std::string kind = j.value("kind", "");
  if (kind == "truth") {
    const cmdp::cmdp_truth t = cmdp::truth_from_json(j);
    const cmdp::truth_bounds b = cmdp::compute_bounds(t);
    std::cout << "truth: link=" << cmdp::link_name(t.link.kind) << " S=" << t.S
              << " A=" << t.A << " d=" << t.d << " H=" << t.H << '\n'
              << "bounds: max ||W||_F=" << b.B << " max row norm=" << b.B_p
              << " max ||theta||=" << b.B_r << '\n';
  } else if (kind == "ons") {
    const cmdp::ons_estimator e = cmdp::ons_estimator::from_checkpoint(j);
    std::cout << "ons estimator: link=" << cmdp::link_name(e.link().kind)
              << " S=" << e.S() << " d=" << e.d() << " t=" << e.t()
              << " eta=" << e.eta() << " lambda=" << e.lambda()
              << " log_det_Z=" << e.log_det_Z() << '\n';
  } else if (kind == "reward") {
    const cmdp::reward_estimator e = cmdp::reward_estimator::from_checkpoint(j);
    std::cout << "reward estimator: d=" << e.d() << " t=" << e.t()
              << " lambda=" << e.lambda() << " log_det_Zr=" << e.log_det_Zr() << '\n';
  } else if (kind == "agent") {
    std::cout << "agent: S=" << j.at("S").get<int>() << " A=" << j.at("A").get<int>()
              << " H=" << j.at("H").get<int>() << " d=" << j.at("d").get<int>()
              << " link=" << j.at("link").get<std::string>()
              << " estimators=" << j.at("transition_estimators").size() << '\n';
  } else {
    throw cmdp::error(cmdp::errc::io_failure,
                      "'" + path + "' has unknown kind '" + kind + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulator for episodic MDPs whose dynamics are linear functions of a context"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment described by a JSON config");
  std::string config_path, out_dir;
  std::vector<std::uint64_t> seeds;
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--seeds", seeds, "override the config's run seeds")->delimiter(',');
  run->add_option("--out", out_dir, "override the config's output directory");

  auto* gen = app.add_subcommand("gen-env", "generate an environment truth file");
  std::string preset, gen_out;
  gen->add_option("--preset", preset, "benchmark | appendix-f | hard-instance")->required();
  gen->add_option("--out", gen_out, "output path")->required();

  auto* ins = app.add_subcommand("inspect", "summarize a checkpoint or truth file");
  std::string ckpt;
  ins->add_option("--checkpoint", ckpt, "JSON file to inspect")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, seeds, out_dir);
    if (gen->parsed()) return cmd_gen_env(preset, gen_out);
    if (ins->parsed()) return cmd_inspect(ckpt);
  } catch (const cmdp::error& e) {
    nlohmann::json rec;
    rec["error"] = {{"code", cmdp::errc_name(e.code())},
                    {"message", e.what()},
                    {"payload", e.payload()}};
    std::cerr << rec.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    nlohmann::json rec;
    rec["error"] = {{"code", "internal"}, {"message", e.what()}};
    std::cerr << rec.dump() << '\n';
    return 2;
  }
  return 0;
}
