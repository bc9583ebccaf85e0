#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsclb/agent.hpp"
#include "fsclb/environment.hpp"
#include "fsclb/protocol.hpp"
#include "fsclb/sketch.hpp"
#include "fsclb/transport.hpp"

namespace fsclb {

struct EnvSpec {
  std::string type = "synthetic";  // synthetic | dataset
  int arm_rank = 0;                // 0 means full rank (= d)
  std::string dataset_path;
};

struct ScheduleSpec {
  std::string mode = "uniform";  // uniform | round-robin | block
  int block_len = 1;
};

struct ExperimentConfig {
  std::string algo = "fsclb";  // fsclb | fedlinucb | random
  int d = 50;
  int l = 20;
  int m_agents = 10;
  int k_arms = 10;
  long t_rounds = 1000;
  int trials = 1;
  double alpha = 1.0;
  double lambda = 1.0;
  double noise_r = 0.1;
  double s_norm = 1.0;
  double arm_norm = 1.0;
  double delta_conf = 0.01;
  EnvSpec env;
  ScheduleSpec schedule;
  std::string transport = "inproc";  // inproc | tcp
  bool theory_mode = false;
  std::uint64_t seed = 42;
  TruncationRule sketch_rule = TruncationRule::SigmaL;
  std::string host = "127.0.0.1";
  std::uint16_t port = 7711;
  int jobs = 1;
};

struct SweepSpec {
  std::vector<int> d_values;
  std::vector<int> l_values;
  std::vector<double> alpha_values;
};

// Flat key = value text with [env], [schedule] and optional [sweep]
// sections. Unknown keys are ConfigError.
ExperimentConfig parse_config_text(const std::string& text,
                                   SweepSpec* sweep = nullptr);
ExperimentConfig parse_config_file(const std::string& path,
                                   SweepSpec* sweep = nullptr);
void validate_config(const ExperimentConfig& cfg);
BanditParams params_from_config(const ExperimentConfig& cfg);

struct RoundRecord {
  long t = 0;
  int agent = 0;
  int chosen_arm = 0;
  double reward = 0.0;
  double instant_regret = 0.0;
  double cum_regret = 0.0;
  bool comm_fired = false;
  std::uint64_t upload_scalars = 0;
  std::uint64_t download_scalars = 0;
  std::int64_t trigger_eval_ns = 0;
  std::int64_t round_ns = 0;
};

struct TheoryCheck {
  std::string name;
  bool passed = true;
  double worst_residual = 0.0;
  long worst_round = -1;
  long evaluations = 0;
};

struct TheoryReport {
  bool enabled = false;
  std::vector<TheoryCheck> checks;
  double eps_hat = 0.0;       // realized spectral error of the full gram
  double comm_bound = 0.0;    // Theorem-style communication budget
  std::uint64_t comm_count = 0;

  bool all_passed() const;
  TheoryCheck* find(const std::string& name);
};

struct TrialSummary {
  std::string algo;
  int d = 0, l = 0, m_agents = 0, k_arms = 0;
  long t_rounds = 0;
  double alpha = 0.0;
  std::uint64_t trial_seed = 0;
  double cum_reward = 0.0;
  double cum_regret = 0.0;
  std::uint64_t comm_count = 0;
  std::uint64_t total_scalars = 0;
  std::uint64_t total_bytes = 0;
  double wall_seconds = 0.0;
  std::int64_t median_trigger_ns = 0;
  double max_rho_loc = 0.0;     // largest |rho_loc| seen on any agent
  double final_rho_ser = 0.0;   // server accumulators at the end (inproc)
  double final_rho_tilde = 0.0;
};

struct TrialResult {
  std::vector<RoundRecord> rounds;
  CommLedger ledger;
  TrialSummary summary;
  TheoryReport theory;
};

// One full Algorithm-1 loop. transport == nullptr runs against an internal
// in-process server; a non-null transport (TCP) must point at a server built
// from the same config. Theory mode needs the internal server.
TrialResult run_trial(const ExperimentConfig& cfg, int trial_index,
                      Transport* transport = nullptr);

// All trials of a config (sequential or cfg.jobs-way parallel, inproc only).
std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg);

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

struct AggregateReport {
  int trials = 0;
  Stat cum_reward;
  Stat cum_regret;
  Stat comm_count;
  Stat total_scalars;
  Stat wall_seconds;
  std::vector<double> mean_cum_regret;   // per round, averaged pointwise
  std::vector<double> mean_cum_reward;
  std::vector<double> mean_cum_scalars;
  std::vector<double> mean_cum_comms;
};

// Homogeneous configs required; throws ConfigError otherwise.
AggregateReport aggregate_trials(const std::vector<TrialResult>& results);

struct InvariantReport {
  TheoryReport theory;
  bool oracle_determinant_ok = false;
  bool oracle_woodbury_ok = false;
  double oracle_det_worst_rel = 0.0;
  double oracle_woodbury_worst_rel = 0.0;
  bool rho_zero_regime = false;    // whether the config qualifies
  bool rho_all_zero = false;       // and whether rho stayed exactly 0
  TrialSummary summary;
  bool all_passed() const;
};

// Theory-mode run plus oracle spot checks; desk scale expected.
InvariantReport invariant_suite(const ExperimentConfig& cfg);

// Output writers.
std::string rounds_csv(const std::vector<RoundRecord>& rounds);
void write_rounds_csv(const std::string& path,
                      const std::vector<RoundRecord>& rounds);
void write_summary_json(const std::string& path, const ExperimentConfig& cfg,
                        const std::vector<TrialResult>& results);
void write_curves_csv(const std::string& path,
                      const std::vector<TrialResult>& results);

}  // namespace fsclb
