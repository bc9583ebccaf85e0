// Command-line front end: run experiments, sweep grids, run the invariant
// checks, and host or drive the TCP transport.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fsclb/dispatcher.hpp"
#include "fsclb/errors.hpp"
#include "fsclb/harness.hpp"
#include "fsclb/transport.hpp"

namespace fs = std::filesystem;
using namespace fsclb;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  std::string algo;
  std::string transport;
  long seed = -1;
  bool theory = false;
  int jobs = 0;
  std::string host;
  int port = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
  auto* c = cmd->add_option("--config", opts.config_path, "config file path");
  if (config_required) c->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "seed override");
  cmd->add_option("--algo", opts.algo, "algo override (fsclb|fedlinucb|random)");
  cmd->add_option("--transport", opts.transport, "transport override (inproc|tcp)");
  cmd->add_flag("--theory", opts.theory, "force theory mode on");
  cmd->add_option("--jobs", opts.jobs, "parallel trials (inproc only)");
  cmd->add_option("--host", opts.host, "server host override");
  cmd->add_option("--port", opts.port, "server port override");
}

ExperimentConfig load_config(const CommonOpts& opts, SweepSpec* sweep = nullptr) {
  ExperimentConfig cfg = opts.config_path.empty()
                             ? ExperimentConfig{}
                             : parse_config_file(opts.config_path, sweep);
  if (!opts.algo.empty()) cfg.algo = opts.algo;
  if (!opts.transport.empty()) cfg.transport = opts.transport;
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.theory) cfg.theory_mode = true;
  if (opts.jobs > 0) cfg.jobs = opts.jobs;
  if (!opts.host.empty()) cfg.host = opts.host;
  if (opts.port > 0) cfg.port = static_cast<std::uint16_t>(opts.port);
  validate_config(cfg);
  return cfg;
}

void write_outputs(const fs::path& dir, const ExperimentConfig& cfg,
                   const std::vector<TrialResult>& results) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const fs::path p = i == 0 ? dir / "rounds.csv"
                              : dir / ("rounds_trial" + std::to_string(i) + ".csv");
    write_rounds_csv(p.string(), results[i].rounds);
  }
  write_summary_json((dir / "summary.json").string(), cfg, results);
}

void print_summary(const ExperimentConfig& cfg,
                   const std::vector<TrialResult>& results) {
  const AggregateReport agg = aggregate_trials(results);
  std::printf("%s d=%d l=%d M=%d T=%ld trials=%d\n", cfg.algo.c_str(), cfg.d,
              cfg.l, cfg.m_agents, cfg.t_rounds, cfg.trials);
  std::printf("  cum_reward  %.4f (sd %.4f)\n", agg.cum_reward.mean,
              agg.cum_reward.stddev);
  std::printf("  cum_regret  %.4f (sd %.4f)\n", agg.cum_regret.mean,
              agg.cum_regret.stddev);
  std::printf("  comms       %.1f (sd %.1f)\n", agg.comm_count.mean,
              agg.comm_count.stddev);
  std::printf("  scalars     %.0f (sd %.0f)\n", agg.total_scalars.mean,
              agg.total_scalars.stddev);
  std::printf("  wall        %.2fs per trial\n", agg.wall_seconds.mean);
}

int cmd_run(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_config(opts);
  const std::vector<TrialResult> results = run_experiment(cfg);
  write_outputs(opts.out_dir, cfg, results);
  print_summary(cfg, results);
  return 0;
}

int cmd_plotdata(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_config(opts);
  const std::vector<TrialResult> results = run_experiment(cfg);
  fs::create_directories(opts.out_dir);
  const fs::path p = fs::path(opts.out_dir) / ("curves_" + cfg.algo + ".csv");
  write_curves_csv(p.string(), results);
  std::printf("wrote %s (%ld rounds, %d trials)\n", p.c_str(), cfg.t_rounds,
              cfg.trials);
  return 0;
}

int cmd_sweep(const CommonOpts& opts) {
  SweepSpec sweep;
  const ExperimentConfig base = load_config(opts, &sweep);
  if (sweep.d_values.empty()) sweep.d_values = {base.d};
  if (sweep.l_values.empty()) sweep.l_values = {base.l};
  if (sweep.alpha_values.empty()) sweep.alpha_values = {base.alpha};

  for (int d : sweep.d_values) {
    for (int l : sweep.l_values) {
      if (l >= d) continue;
      for (double alpha : sweep.alpha_values) {
        ExperimentConfig cfg = base;
        cfg.d = d;
        cfg.l = l;
        cfg.alpha = alpha;
        if (cfg.env.arm_rank > d) cfg.env.arm_rank = d;
        validate_config(cfg);
        char tag[64];
        std::snprintf(tag, sizeof(tag), "d%d_l%d_a%g", d, l, alpha);
        const fs::path dir = fs::path(opts.out_dir) / tag;
        const std::vector<TrialResult> results = run_experiment(cfg);
        write_outputs(dir, cfg, results);
        print_summary(cfg, results);
      }
    }
  }
  return 0;
}

int cmd_check(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts);
  const InvariantReport report = invariant_suite(cfg);
  for (const auto& c : report.theory.checks) {
    std::printf("[%s] %-28s worst residual %.3e at round %ld (%ld evals)\n",
                c.passed ? "PASS" : "FAIL", c.name.c_str(), c.worst_residual,
                c.worst_round, c.evaluations);
  }
  std::printf("[%s] determinant oracle            worst rel %.3e\n",
              report.oracle_determinant_ok ? "PASS" : "FAIL",
              report.oracle_det_worst_rel);
  std::printf("[%s] woodbury oracle               worst rel %.3e\n",
              report.oracle_woodbury_ok ? "PASS" : "FAIL",
              report.oracle_woodbury_worst_rel);
  std::printf("communications %llu, budget %.1f, realized eps_l %.4g\n",
              static_cast<unsigned long long>(report.theory.comm_count),
              report.theory.comm_bound, report.theory.eps_hat);
  if (report.rho_zero_regime) {
    std::printf("[%s] rho stays exactly zero (arm_rank <= l-1 regime)\n",
                report.rho_all_zero ? "PASS" : "FAIL");
  }
  std::printf("median trigger eval: %lld ns\n",
              static_cast<long long>(report.summary.median_trigger_ns));
  return report.all_passed() ? 0 : 1;
}

int cmd_serve(const CommonOpts& opts) {
  const ExperimentConfig cfg = load_config(opts);
  const char* port_env = std::getenv("FSCLB_PORT");
  const std::uint16_t port =
      port_env != nullptr ? static_cast<std::uint16_t>(std::atoi(port_env))
                          : cfg.port;
  ServerDispatcher dispatcher(params_from_config(cfg), false);
  TcpServer server(dispatcher, port);
  std::printf("serving on 127.0.0.1:%u (d=%d l=%d)\n", server.port(), cfg.d,
              cfg.l);
  std::fflush(stdout);
  server.run();
  std::printf("server stopped\n");
  return 0;
}

int cmd_agent(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts);
  cfg.transport = "tcp";
  validate_config(cfg);
  const std::vector<TrialResult> results = run_experiment(cfg);
  write_outputs(opts.out_dir, cfg, results);
  print_summary(cfg, results);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated sketched linear bandit harness"};
  app.require_subcommand(1);

  CommonOpts run_opts, sweep_opts, check_opts, serve_opts, agent_opts,
      plot_opts;
  auto* run = app.add_subcommand("run", "run one experiment config");
  add_common(run, run_opts);
  auto* sweep = app.add_subcommand("sweep", "grid over d / l / alpha");
  add_common(sweep, sweep_opts);
  auto* check = app.add_subcommand("check", "run the invariant suite");
  add_common(check, check_opts);
  auto* serve = app.add_subcommand("serve", "host the TCP server role");
  add_common(serve, serve_opts);
  auto* agent = app.add_subcommand("agent", "run trials against a TCP server");
  add_common(agent, agent_opts);
  auto* plotdata = app.add_subcommand("plotdata", "emit per-round curve CSV");
  add_common(plotdata, plot_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts);
    if (check->parsed()) return cmd_check(check_opts);
    if (serve->parsed()) return cmd_serve(serve_opts);
    if (agent->parsed()) return cmd_agent(agent_opts);
    if (plotdata->parsed()) return cmd_plotdata(plot_opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
