#include "fsclb/harness.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "fsclb/baselines.hpp"
#include "fsclb/dispatcher.hpp"
#include "fsclb/errors.hpp"
#include "fsclb/server.hpp"
#include "fsclb/spectral.hpp"

namespace fsclb {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t ns_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count();
}

Environment build_env(const ExperimentConfig& cfg, Rng& rng) {
  if (cfg.env.type == "synthetic") {
    const int rank = cfg.env.arm_rank == 0 ? cfg.d : cfg.env.arm_rank;
    return make_synthetic_env(cfg.d, rank, cfg.k_arms, cfg.noise_r, cfg.s_norm,
                              cfg.arm_norm, rng);
  }
  DatasetEnv env = load_dataset_csv(cfg.env.dataset_path, cfg.k_arms);
  if (env.features.cols() != cfg.d) {
    throw ConfigError("dataset has " + std::to_string(env.features.cols()) +
                      " features but the config says d = " +
                      std::to_string(cfg.d));
  }
  return env;
}

Schedule build_schedule(const ExperimentConfig& cfg, std::uint64_t seed) {
  Schedule s;
  if (cfg.schedule.mode == "uniform") {
    s.mode = ScheduleMode::UniformRandom;
  } else if (cfg.schedule.mode == "round-robin") {
    s.mode = ScheduleMode::RoundRobin;
  } else {
    s.mode = ScheduleMode::Block;
  }
  s.num_agents = cfg.m_agents;
  s.block_len = cfg.schedule.block_len;
  s.rng = Rng(seed);
  return s;
}

// Collects named inequality checks with their worst violation.
class TheoryTracker {
 public:
  TheoryTracker(bool enabled, double tol) : enabled_(enabled), tol_(tol) {}

  bool enabled() const { return enabled_; }

  void record(const std::string& name, double residual, long round) {
    TheoryCheck& c = check(name);
    c.evaluations += 1;
    if (residual > c.worst_residual || c.evaluations == 1) {
      c.worst_residual = residual;
      c.worst_round = round;
    }
    if (residual > tol_) c.passed = false;
  }

  TheoryReport finish(double eps_hat, double comm_bound,
                      std::uint64_t comm_count) {
    TheoryReport report;
    report.enabled = enabled_;
    report.checks = checks_;
    report.eps_hat = eps_hat;
    report.comm_bound = comm_bound;
    report.comm_count = comm_count;
    return report;
  }

 private:
  TheoryCheck& check(const std::string& name) {
    for (auto& c : checks_) {
      if (c.name == name) return c;
    }
    checks_.push_back(TheoryCheck{name, true, 0.0, -1, 0});
    return checks_.back();
  }

  bool enabled_;
  double tol_;
  std::vector<TheoryCheck> checks_;
};

// Realized spectral error of the selected-arm gram, with sub-roundoff
// eigenvalues treated as exact zeros (same rank convention as the sketch).
double realized_spectral_error(const Matrix& gram, double lambda, int l) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  Vector asc = eig.eigenvalues();
  const int d = static_cast<int>(asc.size());
  Vector desc(d);
  for (int i = 0; i < d; ++i) desc[i] = asc[d - 1 - i];
  const double cutoff =
      d * std::numeric_limits<double>::epsilon() * std::max(desc[0], 0.0);
  for (int i = 0; i < d; ++i) {
    if (desc[i] < cutoff) desc[i] = 0.0;
  }
  return spectral_error(desc, lambda, l);
}

double theorem_comm_bound(const BanditParams& p, double eps_hat) {
  const double growth =
      1.0 + p.t_horizon * p.arm_norm * p.arm_norm / (p.lambda * p.d);
  return 2.0 * p.d * (p.num_agents + 1.0 / p.alpha) *
         std::log((1.0 + eps_hat) * growth);
}

std::int64_t median_ns(std::vector<std::int64_t> v) {
  if (v.empty()) return 0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

struct LoopShared {
  const ExperimentConfig& cfg;
  BanditParams params;
  Environment env;
  Schedule schedule;
  Rng env_rng;
  Rng policy_rng;
  Transport* transport;
  const ServerDispatcher* server_view;  // null for external transports
  TheoryTracker theory;
  Matrix full_gram;  // theory mode: every selected arm
};

[[noreturn]] void rethrow_with_round(const Error& e, long t, int agent) {
  throw Error(std::string(e.what()) + " (round " + std::to_string(t) +
              ", agent " + std::to_string(agent) + ")");
}

void fill_summary_common(const ExperimentConfig& cfg, std::uint64_t trial_seed,
                         TrialSummary& s) {
  s.algo = cfg.algo;
  s.d = cfg.d;
  s.l = cfg.l;
  s.m_agents = cfg.m_agents;
  s.k_arms = cfg.k_arms;
  s.t_rounds = cfg.t_rounds;
  s.alpha = cfg.alpha;
  s.trial_seed = trial_seed;
}

TrialResult run_fsclb_loop(LoopShared& ctx) {
  const BanditParams& p = ctx.params;
  const bool theory = ctx.theory.enabled();
  std::vector<AgentState> agents;
  agents.reserve(p.num_agents);
  for (int m = 0; m < p.num_agents; ++m) {
    agents.push_back(make_agent(m, p, theory));
    agents.back().local.rule = ctx.cfg.sketch_rule;
  }
  const SyntheticEnv* synth = std::get_if<SyntheticEnv>(&ctx.env);
  const bool containment =
      theory && synth != nullptr && p.noise_r == 0.0;

  TrialResult out;
  out.rounds.reserve(ctx.cfg.t_rounds);
  std::vector<std::int64_t> trigger_times;
  trigger_times.reserve(ctx.cfg.t_rounds);
  double cum_regret = 0.0;
  double cum_reward = 0.0;
  double max_rho_loc = 0.0;

  Matrix prev_v_ser;
  double prev_log_det = p.d * std::log(p.lambda);
  if (theory && ctx.server_view != nullptr) {
    prev_v_ser = server_design_matrix(ctx.server_view->fsclb_state(), p);
  }

  for (long t = 1; t <= ctx.cfg.t_rounds; ++t) {
    const auto round_start = Clock::now();
    const int m = schedule_next(ctx.schedule, t);
    try {
    const RoundData rd = env_step(ctx.env, t, ctx.env_rng);
    const int choice = select_arm(agents[m], rd.arms, p);
    const Vector& x = rd.arms[choice];
    const double reward = rd.rewards[choice];
    const double instant = rd.best_value - rd.means[choice];

    local_update(agents[m], x, reward);
    max_rho_loc = std::max(max_rho_loc, std::abs(agents[m].local.rho));
    if (theory) ctx.full_gram += x * x.transpose();

    const auto trig_start = Clock::now();
    const auto [log_det1, fire] = evaluate_trigger(agents[m], p);
    const std::int64_t trig_ns = ns_between(trig_start, Clock::now());
    trigger_times.push_back(trig_ns);

    std::uint64_t up_scalars = 0;
    std::uint64_t down_scalars = 0;
    if (fire) {
      Matrix local_over;
      if (theory) {
        local_over = approx_gram(agents[m].local);
        ctx.theory.record("scfd_local_over",
                          psd_residual(local_over, *agents[m].theory_gram), t);
        Matrix local_plain = agents[m].local.s.transpose() * agents[m].local.s;
        ctx.theory.record("scfd_local_under",
                          psd_residual(*agents[m].theory_gram, local_plain), t);
      }
      const UploadMsg upload = make_upload(agents[m], t);
      up_scalars = message_volume(upload);
      const Frame reply = ctx.transport->roundtrip(serialize_upload(upload));
      if (frame_type_of(reply) != frame_type::kDownload) {
        throw ProtocolError("unexpected reply to upload");
      }
      const DownloadMsg download = deserialize_download(reply);
      down_scalars = message_volume(download);
      apply_download(agents[m], download, p);
      out.ledger.record(up_scalars, down_scalars);

      if (theory && ctx.server_view != nullptr) {
        const ServerState& srv = ctx.server_view->fsclb_state();
        const Matrix v_ser = server_design_matrix(srv, p);
        ctx.theory.record("server_monotonicity", psd_residual(v_ser, prev_v_ser), t);
        Matrix upper = *srv.theory_gram;
        upper.diagonal().array() += p.lambda + srv.delta_ser;
        ctx.theory.record("lemma_a5_upper", psd_residual(upper, v_ser), t);
        Matrix lower = *srv.theory_gram;
        lower.diagonal().array() += p.lambda;
        ctx.theory.record("lemma_a5_lower", psd_residual(v_ser, lower), t);
        ctx.theory.record("sketch_covariance_comparison",
                          psd_residual(v_ser, local_over / p.alpha), t);
        ctx.theory.record(
            "log_det_nondecreasing",
            (prev_log_det - srv.log_det_v) / (1.0 + std::abs(prev_log_det)), t);
        if (containment) {
          const Vector err = agents[m].theta_hat - synth->theta_star;
          const double lhs = std::sqrt(
              (p.lambda + agents[m].delta) * err.squaredNorm() +
              (agents[m].policy_sketch * err).squaredNorm());
          ctx.theory.record("noiseless_containment",
                            (lhs - agents[m].beta) / (1.0 + agents[m].beta), t);
        }
        prev_v_ser = v_ser;
        prev_log_det = srv.log_det_v;
      }
    }

    cum_regret += instant;
    cum_reward += reward;
    RoundRecord rec;
    rec.t = t;
    rec.agent = m;
    rec.chosen_arm = choice;
    rec.reward = reward;
    rec.instant_regret = instant;
    rec.cum_regret = cum_regret;
    rec.comm_fired = fire;
    rec.upload_scalars = up_scalars;
    rec.download_scalars = down_scalars;
    rec.trigger_eval_ns = trig_ns;
    rec.round_ns = ns_between(round_start, Clock::now());
    out.rounds.push_back(rec);
    } catch (const Error& e) {
      rethrow_with_round(e, t, m);
    }
  }

  out.summary.cum_reward = cum_reward;
  out.summary.cum_regret = cum_regret;
  out.summary.comm_count = out.ledger.switching_count;
  out.summary.total_scalars = out.ledger.total_scalars();
  out.summary.total_bytes = out.ledger.uploaded_bytes + out.ledger.downloaded_bytes;
  out.summary.median_trigger_ns = median_ns(trigger_times);
  out.summary.max_rho_loc = max_rho_loc;
  if (ctx.server_view != nullptr) {
    out.summary.final_rho_ser = ctx.server_view->fsclb_state().rho_ser;
    out.summary.final_rho_tilde = ctx.server_view->fsclb_state().sketch.rho;
  } else {
    out.summary.final_rho_ser = std::numeric_limits<double>::quiet_NaN();
    out.summary.final_rho_tilde = std::numeric_limits<double>::quiet_NaN();
  }

  if (theory) {
    const double eps_hat = realized_spectral_error(ctx.full_gram, p.lambda, p.l);
    const double bound = theorem_comm_bound(p, eps_hat);
    ctx.theory.record("theorem51_comm_bound",
                      static_cast<double>(out.ledger.switching_count) - bound,
                      ctx.cfg.t_rounds);
    out.theory = ctx.theory.finish(eps_hat, bound, out.ledger.switching_count);
  }
  return out;
}

TrialResult run_fedlin_loop(LoopShared& ctx) {
  const BanditParams& p = ctx.params;
  std::vector<FedLinAgentState> agents;
  agents.reserve(p.num_agents);
  for (int m = 0; m < p.num_agents; ++m) agents.push_back(make_fedlin_agent(m, p));

  TrialResult out;
  out.rounds.reserve(ctx.cfg.t_rounds);
  std::vector<std::int64_t> trigger_times;
  trigger_times.reserve(ctx.cfg.t_rounds);
  double cum_regret = 0.0;
  double cum_reward = 0.0;

  for (long t = 1; t <= ctx.cfg.t_rounds; ++t) {
    const auto round_start = Clock::now();
    const int m = schedule_next(ctx.schedule, t);
    try {
    const RoundData rd = env_step(ctx.env, t, ctx.env_rng);
    const int choice = fedlin_select_arm(agents[m], rd.arms, p);
    const Vector& x = rd.arms[choice];
    const double reward = rd.rewards[choice];
    const double instant = rd.best_value - rd.means[choice];

    fedlin_local_update(agents[m], x, reward);

    const auto trig_start = Clock::now();
    const auto [log_det1, fire] = fedlin_evaluate_trigger(agents[m], p);
    const std::int64_t trig_ns = ns_between(trig_start, Clock::now());
    trigger_times.push_back(trig_ns);

    std::uint64_t up_scalars = 0;
    std::uint64_t down_scalars = 0;
    if (fire) {
      const FedLinUploadMsg upload = fedlin_make_upload(agents[m], t);
      up_scalars = fedlin_upload_volume(p.d);
      const Frame reply =
          ctx.transport->roundtrip(serialize_fedlin_upload(upload));
      if (frame_type_of(reply) != frame_type::kFedLinDownload) {
        throw ProtocolError("unexpected reply to upload");
      }
      const FedLinDownloadMsg download = deserialize_fedlin_download(reply);
      down_scalars = fedlin_download_volume(p.d);
      fedlin_apply_download(agents[m], download, p);
      out.ledger.record(up_scalars, down_scalars);
    }

    cum_regret += instant;
    cum_reward += reward;
    RoundRecord rec;
    rec.t = t;
    rec.agent = m;
    rec.chosen_arm = choice;
    rec.reward = reward;
    rec.instant_regret = instant;
    rec.cum_regret = cum_regret;
    rec.comm_fired = fire;
    rec.upload_scalars = up_scalars;
    rec.download_scalars = down_scalars;
    rec.trigger_eval_ns = trig_ns;
    rec.round_ns = ns_between(round_start, Clock::now());
    out.rounds.push_back(rec);
    } catch (const Error& e) {
      rethrow_with_round(e, t, m);
    }
  }

  out.summary.cum_reward = cum_reward;
  out.summary.cum_regret = cum_regret;
  out.summary.comm_count = out.ledger.switching_count;
  out.summary.total_scalars = out.ledger.total_scalars();
  out.summary.total_bytes = out.ledger.uploaded_bytes + out.ledger.downloaded_bytes;
  out.summary.median_trigger_ns = median_ns(trigger_times);
  return out;
}

TrialResult run_random_loop(LoopShared& ctx) {
  TrialResult out;
  out.rounds.reserve(ctx.cfg.t_rounds);
  double cum_regret = 0.0;
  double cum_reward = 0.0;

  for (long t = 1; t <= ctx.cfg.t_rounds; ++t) {
    const auto round_start = Clock::now();
    const int m = schedule_next(ctx.schedule, t);
    const RoundData rd = env_step(ctx.env, t, ctx.env_rng);
    const int choice =
        random_select(static_cast<int>(rd.arms.size()), ctx.policy_rng);
    const double reward = rd.rewards[choice];
    const double instant = rd.best_value - rd.means[choice];
    cum_regret += instant;
    cum_reward += reward;

    RoundRecord rec;
    rec.t = t;
    rec.agent = m;
    rec.chosen_arm = choice;
    rec.reward = reward;
    rec.instant_regret = instant;
    rec.cum_regret = cum_regret;
    rec.round_ns = ns_between(round_start, Clock::now());
    out.rounds.push_back(rec);
  }

  out.summary.cum_reward = cum_reward;
  out.summary.cum_regret = cum_regret;
  return out;
}

}  // namespace

bool TheoryReport::all_passed() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

TheoryCheck* TheoryReport::find(const std::string& name) {
  for (auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

TrialResult run_trial(const ExperimentConfig& cfg, int trial_index,
                      Transport* transport) {
  validate_config(cfg);
  if (cfg.theory_mode && transport != nullptr) {
    throw ConfigError("theory mode requires the internal in-process server");
  }
  const BanditParams params = params_from_config(cfg);
  const std::uint64_t trial_seed = split_seed(cfg.seed, trial_index);
  Rng env_rng(split_seed(trial_seed, 1));

  std::unique_ptr<ServerDispatcher> dispatcher;
  std::unique_ptr<Transport> inproc;
  const ServerDispatcher* view = nullptr;
  if (transport == nullptr) {
    dispatcher = std::make_unique<ServerDispatcher>(params, cfg.theory_mode);
    inproc = std::make_unique<InprocTransport>(*dispatcher);
    transport = inproc.get();
    view = dispatcher.get();
  } else {
    const Frame ack = transport->roundtrip(make_control_frame(
        frame_type::kReset, static_cast<std::uint32_t>(cfg.l),
        static_cast<std::uint32_t>(cfg.d)));
    if (frame_type_of(ack) != frame_type::kResetAck) {
      throw ProtocolError("server did not acknowledge reset");
    }
  }

  LoopShared ctx{cfg,
                 params,
                 build_env(cfg, env_rng),
                 build_schedule(cfg, split_seed(trial_seed, 2)),
                 std::move(env_rng),
                 Rng(split_seed(trial_seed, 3)),
                 transport,
                 view,
                 TheoryTracker(cfg.theory_mode, 1e-7),
                 cfg.theory_mode ? Matrix::Zero(cfg.d, cfg.d) : Matrix()};

  const auto start = Clock::now();
  TrialResult result;
  try {
    if (cfg.algo == "fsclb") {
      result = run_fsclb_loop(ctx);
    } else if (cfg.algo == "fedlinucb") {
      result = run_fedlin_loop(ctx);
    } else {
      result = run_random_loop(ctx);
    }
  } catch (const Error& e) {
    throw Error("trial " + std::to_string(trial_index) + " failed: " + e.what());
  }
  result.summary.wall_seconds =
      static_cast<double>(ns_between(start, Clock::now())) * 1e-9;
  fill_summary_common(cfg, trial_seed, result.summary);
  return result;
}

std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  std::vector<TrialResult> results(cfg.trials);

  if (cfg.transport == "tcp") {
    const char* host_env = std::getenv("FSCLB_HOST");
    const char* port_env = std::getenv("FSCLB_PORT");
    const std::string host = host_env != nullptr ? host_env : cfg.host;
    const std::uint16_t port =
        port_env != nullptr ? static_cast<std::uint16_t>(std::atoi(port_env))
                            : cfg.port;
    TcpClientTransport client(host, port);
    for (int i = 0; i < cfg.trials; ++i) {
      results[i] = run_trial(cfg, i, &client);
    }
    return results;
  }

  const int jobs = std::min(cfg.jobs, cfg.trials);
  if (jobs <= 1) {
    for (int i = 0; i < cfg.trials; ++i) results[i] = run_trial(cfg, i);
    return results;
  }

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= cfg.trials) return;
        try {
          results[i] = run_trial(cfg, i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

namespace {

Stat make_stat(const std::vector<double>& xs) {
  Stat s;
  const double n = static_cast<double>(xs.size());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

}  // namespace

AggregateReport aggregate_trials(const std::vector<TrialResult>& results) {
  if (results.empty()) throw ConfigError("aggregate_trials: no trials");
  const TrialSummary& first = results.front().summary;
  for (const auto& r : results) {
    const TrialSummary& s = r.summary;
    if (s.algo != first.algo || s.d != first.d || s.l != first.l ||
        s.m_agents != first.m_agents || s.k_arms != first.k_arms ||
        s.t_rounds != first.t_rounds || s.alpha != first.alpha) {
      throw ConfigError("aggregate_trials: heterogeneous trial configs");
    }
  }

  AggregateReport report;
  report.trials = static_cast<int>(results.size());
  std::vector<double> rewards, regrets, comms, scalars, walls;
  for (const auto& r : results) {
    rewards.push_back(r.summary.cum_reward);
    regrets.push_back(r.summary.cum_regret);
    comms.push_back(static_cast<double>(r.summary.comm_count));
    scalars.push_back(static_cast<double>(r.summary.total_scalars));
    walls.push_back(r.summary.wall_seconds);
  }
  report.cum_reward = make_stat(rewards);
  report.cum_regret = make_stat(regrets);
  report.comm_count = make_stat(comms);
  report.total_scalars = make_stat(scalars);
  report.wall_seconds = make_stat(walls);

  const std::size_t t_len = results.front().rounds.size();
  report.mean_cum_regret.assign(t_len, 0.0);
  report.mean_cum_reward.assign(t_len, 0.0);
  report.mean_cum_scalars.assign(t_len, 0.0);
  report.mean_cum_comms.assign(t_len, 0.0);
  for (const auto& r : results) {
    double reward_sum = 0.0;
    double scalar_sum = 0.0;
    double comm_sum = 0.0;
    for (std::size_t i = 0; i < t_len; ++i) {
      const RoundRecord& rec = r.rounds[i];
      reward_sum += rec.reward;
      scalar_sum += static_cast<double>(rec.upload_scalars + rec.download_scalars);
      comm_sum += rec.comm_fired ? 1.0 : 0.0;
      report.mean_cum_regret[i] += rec.cum_regret;
      report.mean_cum_reward[i] += reward_sum;
      report.mean_cum_scalars[i] += scalar_sum;
      report.mean_cum_comms[i] += comm_sum;
    }
  }
  const double inv = 1.0 / report.trials;
  for (std::size_t i = 0; i < t_len; ++i) {
    report.mean_cum_regret[i] *= inv;
    report.mean_cum_reward[i] *= inv;
    report.mean_cum_scalars[i] *= inv;
    report.mean_cum_comms[i] *= inv;
  }
  return report;
}

namespace {

// Oracle spot checks shared by the invariant suite: the same quantities
// computed through an all-dense route.
double det_oracle_worst_rel(int cases, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < cases; ++i) {
    const int d = 2 + rng.uniform_int(11);       // <= 12
    const int n = 1 + rng.uniform_int(std::min(d, 4));  // <= 4
    Matrix b(n, d);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) b(r, c) = rng.gaussian();
    const double c = 0.1 + 3.0 * rng.uniform();
    Matrix dense = b.transpose() * b;
    dense.diagonal().array() += c;
    const double oracle = dense.determinant();
    const double got = det_from_singvals(singular_values(b), c, d).value();
    worst = std::max(worst, std::abs(got - oracle) / std::abs(oracle));
  }
  return worst;
}

double woodbury_oracle_worst_rel(int cases, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < cases; ++i) {
    const int d = 3 + rng.uniform_int(10);
    const int l = 1 + rng.uniform_int(std::min(d - 1, 4));
    Matrix g(l, d);
    for (int r = 0; r < l; ++r)
      for (int c = 0; c < d; ++c) g(r, c) = rng.gaussian();
    // Sketches always carry the Sigma V^T row form; build the test matrix in
    // that family.
    const SvdResult svd = thin_svd(g);
    const Matrix s = svd.singular_values.asDiagonal() * svd.vt;
    const double c = 0.2 + 2.0 * rng.uniform();
    const Vector hdiag =
        (svd.singular_values.array().square() + c).inverse().matrix();
    Vector v(d);
    for (int j = 0; j < d; ++j) v[j] = rng.gaussian();

    Matrix dense = s.transpose() * s;
    dense.diagonal().array() += c;
    const Vector oracle = dense.ldlt().solve(v);
    const Vector got = woodbury_inverse_apply(s, hdiag, c, v);
    worst = std::max(worst, (got - oracle).norm() / oracle.norm());
    const double q_oracle = v.dot(oracle);
    const double q_got = woodbury_quadratic_form(s, hdiag, c, v);
    worst = std::max(worst, std::abs(q_got - q_oracle) / std::abs(q_oracle));
  }
  return worst;
}

}  // namespace

bool InvariantReport::all_passed() const {
  if (!theory.all_passed()) return false;
  if (!oracle_determinant_ok || !oracle_woodbury_ok) return false;
  if (rho_zero_regime && !rho_all_zero) return false;
  return true;
}

InvariantReport invariant_suite(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.theory_mode = true;
  cfg.transport = "inproc";
  if (cfg.d > 32 || cfg.t_rounds > 5000) {
    throw ConfigError("invariant_suite expects desk scale (d <= 32, T <= 5000)");
  }
  if (cfg.algo != "fsclb") {
    throw ConfigError("invariant_suite checks the fsclb algorithm");
  }

  InvariantReport report;
  const TrialResult trial = run_trial(cfg, 0);
  report.theory = trial.theory;
  report.summary = trial.summary;

  report.oracle_det_worst_rel = det_oracle_worst_rel(50, split_seed(cfg.seed, 101));
  report.oracle_determinant_ok = report.oracle_det_worst_rel <= 1e-8;
  report.oracle_woodbury_worst_rel =
      woodbury_oracle_worst_rel(50, split_seed(cfg.seed, 102));
  report.oracle_woodbury_ok = report.oracle_woodbury_worst_rel <= 1e-8;

  const int rank = cfg.env.arm_rank == 0 ? cfg.d : cfg.env.arm_rank;
  report.rho_zero_regime = cfg.env.type == "synthetic" && cfg.l >= rank + 1;
  report.rho_all_zero = trial.summary.max_rho_loc == 0.0 &&
                        trial.summary.final_rho_ser == 0.0 &&
                        trial.summary.final_rho_tilde == 0.0;
  return report;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string rounds_csv(const std::vector<RoundRecord>& rounds) {
  std::string out =
      "t,agent,chosen_arm,reward,instant_regret,cum_regret,comm_fired,"
      "upload_scalars,download_scalars,trigger_eval_ns,round_ns\n";
  for (const auto& r : rounds) {
    out += std::to_string(r.t);
    out += ',';
    out += std::to_string(r.agent);
    out += ',';
    out += std::to_string(r.chosen_arm);
    out += ',';
    out += fmt_double(r.reward);
    out += ',';
    out += fmt_double(r.instant_regret);
    out += ',';
    out += fmt_double(r.cum_regret);
    out += ',';
    out += r.comm_fired ? '1' : '0';
    out += ',';
    out += std::to_string(r.upload_scalars);
    out += ',';
    out += std::to_string(r.download_scalars);
    out += ',';
    out += std::to_string(r.trigger_eval_ns);
    out += ',';
    out += std::to_string(r.round_ns);
    out += '\n';
  }
  return out;
}

void write_rounds_csv(const std::string& path,
                      const std::vector<RoundRecord>& rounds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << rounds_csv(rounds);
}

namespace {

nlohmann::json json_stat(const Stat& s) {
  return nlohmann::json{{"mean", s.mean}, {"stddev", s.stddev}};
}

nlohmann::json json_config(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["algo"] = cfg.algo;
  j["d"] = cfg.d;
  j["l"] = cfg.l;
  j["m"] = cfg.m_agents;
  j["k"] = cfg.k_arms;
  j["t"] = cfg.t_rounds;
  j["trials"] = cfg.trials;
  j["alpha"] = cfg.alpha;
  j["lambda"] = cfg.lambda;
  j["noise_r"] = cfg.noise_r;
  j["s_norm"] = cfg.s_norm;
  j["arm_norm"] = cfg.arm_norm;
  j["delta_conf"] = cfg.delta_conf;
  j["env"] = {{"type", cfg.env.type},
              {"arm_rank", cfg.env.arm_rank},
              {"path", cfg.env.dataset_path}};
  j["schedule"] = {{"mode", cfg.schedule.mode},
                   {"block", cfg.schedule.block_len}};
  j["transport"] = cfg.transport;
  j["theory"] = cfg.theory_mode;
  j["seed"] = cfg.seed;
  j["sketch_rule"] = cfg.sketch_rule == TruncationRule::SigmaL
                         ? "sigma_l"
                         : "sigma_l_plus_1";
  return j;
}

}  // namespace

void write_summary_json(const std::string& path, const ExperimentConfig& cfg,
                        const std::vector<TrialResult>& results) {
  nlohmann::json j;
  j["config"] = json_config(cfg);

  nlohmann::json trials = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json t;
    t["seed"] = r.summary.trial_seed;
    t["cum_reward"] = r.summary.cum_reward;
    t["cum_regret"] = r.summary.cum_regret;
    t["comm_count"] = r.summary.comm_count;
    t["uploaded_scalars"] = r.ledger.uploaded_scalars;
    t["downloaded_scalars"] = r.ledger.downloaded_scalars;
    t["uploaded_bytes"] = r.ledger.uploaded_bytes;
    t["downloaded_bytes"] = r.ledger.downloaded_bytes;
    t["wall_seconds"] = r.summary.wall_seconds;
    t["median_trigger_ns"] = r.summary.median_trigger_ns;
    trials.push_back(t);
  }
  j["trials"] = trials;

  const AggregateReport agg = aggregate_trials(results);
  j["aggregate"] = {{"cum_reward", json_stat(agg.cum_reward)},
                    {"cum_regret", json_stat(agg.cum_regret)},
                    {"comm_count", json_stat(agg.comm_count)},
                    {"total_scalars", json_stat(agg.total_scalars)},
                    {"wall_seconds", json_stat(agg.wall_seconds)}};

  nlohmann::json conventions;
  conventions["volume_unit"] = "scalars";
  conventions["fsclb_scalars_per_comm"] =
      upload_volume(cfg.l, cfg.d) + download_volume(cfg.l, cfg.d);
  conventions["fedlinucb_scalars_per_comm"] =
      fedlin_upload_volume(cfg.d) + fedlin_download_volume(cfg.d);
  conventions["fedlinucb_reference_volume"] = fedlin_paper_volume(cfg.d);
  conventions["fedlinucb_beta"] = "shared confidence radius with Delta = 0";
  j["conventions"] = conventions;

  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

void write_curves_csv(const std::string& path,
                      const std::vector<TrialResult>& results) {
  const AggregateReport agg = aggregate_trials(results);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "t,mean_cum_regret,mean_cum_reward,mean_cum_scalars,mean_cum_comms\n";
  for (std::size_t i = 0; i < agg.mean_cum_regret.size(); ++i) {
    out << (i + 1) << ',' << fmt_double(agg.mean_cum_regret[i]) << ','
        << fmt_double(agg.mean_cum_reward[i]) << ','
        << fmt_double(agg.mean_cum_scalars[i]) << ','
        << fmt_double(agg.mean_cum_comms[i]) << '\n';
  }
}

}  // namespace fsclb
