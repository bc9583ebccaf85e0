// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Thresholds and tolerances are pinned in code, not configurable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "fsclb/agent.hpp"
#include "fsclb/baselines.hpp"
#include "fsclb/dispatcher.hpp"
#include "fsclb/harness.hpp"
#include "fsclb/rng.hpp"
#include "fsclb/server.hpp"
#include "fsclb/sketch.hpp"
#include "fsclb/spectral.hpp"
#include "fsclb/transport.hpp"

using namespace fsclb;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::duration<double>>(Clock::now() -
                                                                   start)
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

// --- criterion 1: determinant oracle ---------------------------------------
void criterion_1() {
  const auto start = Clock::now();
  Rng rng(424201);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int d = 2 + rng.uniform_int(11);            // d <= 12
    const int n = 1 + rng.uniform_int(std::min(d, 4));  // l <= 4
    Matrix b(n, d);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) b(r, c) = 2.0 * rng.gaussian();
    const double c = 0.05 + 4.0 * rng.uniform();
    Matrix dense = b.transpose() * b;
    dense.diagonal().array() += c;
    const double oracle = dense.determinant();
    const double got = det_from_singvals(singular_values(b), c, d).value();
    worst = std::max(worst, std::abs(got - oracle) / std::abs(oracle));
  }
  const double secs = seconds_since(start);
  report(1, worst <= 1e-8 && secs < 5.0,
         fmt("determinant oracle, 200 cases: worst rel %.3e, %.2fs", worst, secs));
}

// --- criterion 2: woodbury oracle -------------------------------------------
void criterion_2() {
  const auto start = Clock::now();
  Rng rng(424202);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int d = 3 + rng.uniform_int(10);
    const int l = 1 + rng.uniform_int(std::min(d - 1, 4));
    Matrix g(l, d);
    for (int r = 0; r < l; ++r)
      for (int c = 0; c < d; ++c) g(r, c) = rng.gaussian();
    const SvdResult svd = thin_svd(g);
    const Matrix s = svd.singular_values.asDiagonal() * svd.vt;
    const double c = 0.1 + 3.0 * rng.uniform();
    const Vector h = (svd.singular_values.array().square() + c).inverse().matrix();
    Vector v(d);
    for (int j = 0; j < d; ++j) v[j] = rng.gaussian();

    Matrix dense = s.transpose() * s;
    dense.diagonal().array() += c;
    const Vector oracle = dense.ldlt().solve(v);
    const Vector got = woodbury_inverse_apply(s, h, c, v);
    worst = std::max(worst, (got - oracle).norm() / oracle.norm());
    const double q = woodbury_quadratic_form(s, h, c, v);
    worst = std::max(worst, std::abs(q - v.dot(oracle)) / std::abs(v.dot(oracle)));
  }
  const double secs = seconds_since(start);
  report(2, worst <= 1e-8 && secs < 5.0,
         fmt("woodbury oracle, 200 cases: worst rel %.3e, %.2fs", worst, secs));
}

// --- criterion 3: scfd sandwich ---------------------------------------------
void criterion_3() {
  Rng rng(424203);
  double worst = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    const int d = 4 + rng.uniform_int(13);   // <= 16
    const int l = 1 + rng.uniform_int(d - 1);
    const int n = 40 + rng.uniform_int(161);  // <= 200
    SketchState sk = make_sketch(l, d);
    Matrix exact = Matrix::Zero(d, d);
    for (int i = 0; i < n; ++i) {
      Vector x(d);
      for (int j = 0; j < d; ++j) x[j] = rng.gaussian();
      sk = scfd_append(sk, x);
      exact += x * x.transpose();
      worst = std::max(worst, psd_residual(approx_gram(sk), exact));
      worst = std::max(worst,
                       psd_residual(exact, sk.s.transpose() * sk.s));
    }
  }
  report(3, worst <= 1e-7,
         fmt("scfd sandwich on random streams: worst residual %.3e", worst));
}

// --- criterion 4: lemma suite -----------------------------------------------
void criterion_4() {
  ExperimentConfig cfg;
  cfg.algo = "fsclb";
  cfg.d = 10;
  cfg.l = 4;
  cfg.m_agents = 3;
  cfg.k_arms = 10;
  cfg.t_rounds = 2000;
  cfg.alpha = 1.0;
  cfg.noise_r = 0.1;
  cfg.seed = 424204;
  cfg.schedule.mode = "uniform";
  const InvariantReport rep = invariant_suite(cfg);

  std::string detail = "lemma suite (d=10,l=4,M=3,a=1,T=2000):";
  bool pass = true;
  for (const auto& c : rep.theory.checks) {
    if (c.name == "noiseless_containment") continue;
    pass &= c.passed;
    detail += " " + c.name + (c.passed ? " ok" : " FAIL");
  }
  const bool bound_ok =
      static_cast<double>(rep.theory.comm_count) <= rep.theory.comm_bound;
  pass &= bound_ok;
  detail += fmt("; comms %llu <= budget %.1f (eps_hat %.3g)",
                static_cast<unsigned long long>(rep.theory.comm_count),
                rep.theory.comm_bound, rep.theory.eps_hat);
  report(4, pass, detail);
}

// --- criterion 5: volume accounting exactness --------------------------------
void criterion_5() {
  ExperimentConfig cfg;
  cfg.d = 16;
  cfg.l = 6;
  cfg.m_agents = 4;
  cfg.k_arms = 6;
  cfg.t_rounds = 1200;
  cfg.seed = 424205;
  cfg.schedule.mode = "uniform";

  cfg.algo = "fsclb";
  const TrialResult sk = run_trial(cfg, 0);
  const std::uint64_t sk_form = 2ull * cfg.l * cfg.d + 2ull * cfg.d + cfg.l + 3;
  const bool sk_ok =
      sk.ledger.total_scalars() == sk.ledger.switching_count * sk_form &&
      sk.ledger.switching_count > 0;

  cfg.algo = "fedlinucb";
  const TrialResult fl = run_trial(cfg, 0);
  const std::uint64_t fl_form = 2ull * cfg.d * cfg.d + cfg.d + 1;
  const bool fl_ok =
      fl.ledger.total_scalars() == fl.ledger.switching_count * fl_form &&
      fl.ledger.switching_count > 0;

  report(5, sk_ok && fl_ok,
         fmt("ledger exactness: fsclb %llu comms x %llu, fedlinucb %llu comms x %llu",
             static_cast<unsigned long long>(sk.ledger.switching_count),
             static_cast<unsigned long long>(sk_form),
             static_cast<unsigned long long>(fl.ledger.switching_count),
             static_cast<unsigned long long>(fl_form)));
}

// --- criterion 6: cost reduction ---------------------------------------------
void criterion_6() {
  const auto start = Clock::now();
  ExperimentConfig cfg;
  cfg.d = 50;
  cfg.l = 20;
  cfg.m_agents = 10;
  cfg.k_arms = 10;
  cfg.alpha = 1.0;
  cfg.t_rounds = 5000;
  cfg.trials = 5;
  cfg.env.arm_rank = 0;  // full-rank arms
  cfg.seed = 424206;
  cfg.schedule.mode = "uniform";

  cfg.algo = "fsclb";
  const AggregateReport sk = aggregate_trials(run_experiment(cfg));
  cfg.algo = "fedlinucb";
  const AggregateReport fl = aggregate_trials(run_experiment(cfg));
  const double scalar_ratio = sk.total_scalars.mean / fl.total_scalars.mean;

  // trigger cost at d = 400, l = 32: representative loaded states
  BanditParams bench;
  bench.d = 400;
  bench.l = 32;
  bench.num_agents = 10;
  bench.t_horizon = 5000;
  Rng rng(424207);
  AgentState sk_agent = make_agent(0, bench);
  for (int i = 0; i < bench.l; ++i) {
    Vector x(bench.d);
    for (int j = 0; j < bench.d; ++j) x[j] = rng.gaussian();
    local_update(sk_agent, x / x.norm(), rng.uniform());
  }
  for (int i = 0; i < bench.l; ++i) {
    Vector x(bench.d);
    for (int j = 0; j < bench.d; ++j) x[j] = rng.gaussian();
    sk_agent.policy_sketch.row(i) = x.transpose() / x.norm();
  }
  FedLinAgentState fl_agent = make_fedlin_agent(0, bench);
  for (int i = 0; i < bench.l; ++i) {
    Vector x(bench.d);
    for (int j = 0; j < bench.d; ++j) x[j] = rng.gaussian();
    fedlin_local_update(fl_agent, x / x.norm(), rng.uniform());
  }

  auto median_eval = [](auto&& eval) {
    std::vector<std::int64_t> times;
    for (int rep = 0; rep < 31; ++rep) {
      const auto t0 = Clock::now();
      eval();
      times.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(
                          Clock::now() - t0)
                          .count());
    }
    std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
    return times[times.size() / 2];
  };
  evaluate_trigger(sk_agent, bench);        // warm up
  fedlin_evaluate_trigger(fl_agent, bench);
  const std::int64_t sk_ns =
      median_eval([&] { evaluate_trigger(sk_agent, bench); });
  const std::int64_t fl_ns =
      median_eval([&] { fedlin_evaluate_trigger(fl_agent, bench); });
  const double time_ratio =
      static_cast<double>(sk_ns) / static_cast<double>(fl_ns);

  const double secs = seconds_since(start);
  report(6,
         scalar_ratio <= 0.6 && time_ratio <= 1.0 / 3.0 && secs < 600.0,
         fmt("scalars fsclb/fedlinucb %.3f (<= 0.6); trigger %lld ns vs %lld ns, "
             "ratio %.3f (<= 0.333); %.1fs",
             scalar_ratio, static_cast<long long>(sk_ns),
             static_cast<long long>(fl_ns), time_ratio, secs));
}

// --- criterion 7: marginal reward sacrifice ----------------------------------
void criterion_7() {
  ExperimentConfig cfg;
  cfg.d = 50;
  cfg.l = 20;
  cfg.m_agents = 10;
  cfg.k_arms = 10;
  cfg.alpha = 1.0;
  cfg.t_rounds = 5000;
  cfg.trials = 5;
  cfg.env.arm_rank = 10;  // <= l - 1, the zero-spectral-error regime
  cfg.noise_r = 0.0;      // deterministic rewards isolate the sketching loss
  cfg.seed = 424208;
  cfg.schedule.mode = "uniform";

  cfg.algo = "fsclb";
  const AggregateReport sk = aggregate_trials(run_experiment(cfg));
  cfg.algo = "fedlinucb";
  const AggregateReport fl = aggregate_trials(run_experiment(cfg));
  cfg.algo = "random";
  const AggregateReport rnd = aggregate_trials(run_experiment(cfg));

  const double vs_fedlin = sk.cum_regret.mean / fl.cum_regret.mean;
  const double vs_random = sk.cum_regret.mean / rnd.cum_regret.mean;
  report(7, vs_fedlin <= 2.0 && vs_random <= 0.35,
         fmt("noiseless mean regret fsclb %.1f, fedlinucb %.1f, random %.1f; "
             "ratios %.3f (<= 2) and %.3f (<= 0.35)",
             sk.cum_regret.mean, fl.cum_regret.mean, rnd.cum_regret.mean,
             vs_fedlin, vs_random));
}

// --- criterion 8: transport determinism --------------------------------------
void criterion_8() {
  ExperimentConfig cfg;
  cfg.d = 16;
  cfg.l = 6;
  cfg.m_agents = 3;
  cfg.k_arms = 5;
  cfg.t_rounds = 500;
  cfg.seed = 424209;
  cfg.schedule.mode = "uniform";

  const TrialResult inproc = run_trial(cfg, 0);
  ServerDispatcher dispatcher(params_from_config(cfg), false);
  TcpServer server(dispatcher, 0);
  server.start();
  TrialResult tcp;
  {
    TcpClientTransport client("127.0.0.1", server.port());
    tcp = run_trial(cfg, 0, &client);
  }
  server.stop();

  // compare the rounds.csv content column-for-column, excluding the two
  // wall-clock columns (they are measurements, not experiment scalars)
  bool equal = inproc.rounds.size() == tcp.rounds.size();
  long first_diff = -1;
  for (std::size_t i = 0; equal && i < inproc.rounds.size(); ++i) {
    const RoundRecord& a = inproc.rounds[i];
    const RoundRecord& b = tcp.rounds[i];
    if (a.t != b.t || a.agent != b.agent || a.chosen_arm != b.chosen_arm ||
        a.reward != b.reward || a.instant_regret != b.instant_regret ||
        a.cum_regret != b.cum_regret || a.comm_fired != b.comm_fired ||
        a.upload_scalars != b.upload_scalars ||
        a.download_scalars != b.download_scalars) {
      equal = false;
      first_diff = a.t;
    }
  }
  equal = equal && inproc.ledger.total_scalars() == tcp.ledger.total_scalars();
  report(8, equal,
         equal ? fmt("inproc and tcp runs identical over %ld rounds (%llu comms)",
                     cfg.t_rounds,
                     static_cast<unsigned long long>(tcp.ledger.switching_count))
               : fmt("first divergence at round %ld", first_diff));
}

// --- criterion 9: zero spectral-error regime ----------------------------------
void criterion_9() {
  ExperimentConfig cfg;
  cfg.d = 16;
  cfg.l = 8;
  cfg.m_agents = 3;
  cfg.k_arms = 6;
  cfg.t_rounds = 1500;
  cfg.env.arm_rank = 6;  // l >= rank + 1
  cfg.seed = 424210;
  cfg.schedule.mode = "uniform";
  const TrialResult r = run_trial(cfg, 0);
  const bool pass = r.summary.max_rho_loc == 0.0 &&
                    r.summary.final_rho_ser == 0.0 &&
                    r.summary.final_rho_tilde == 0.0 &&
                    r.summary.comm_count > 0;
  report(9, pass,
         fmt("arm_rank=6, l=8: max rho_loc %.1e, rho_ser %.1e, rho~ %.1e over "
             "%llu comms (all exactly 0)",
             r.summary.max_rho_loc, r.summary.final_rho_ser,
             r.summary.final_rho_tilde,
             static_cast<unsigned long long>(r.summary.comm_count)));
}

// --- criterion 10: noiseless confidence containment ----------------------------
void criterion_10() {
  bool pass = true;
  std::string detail = "noiseless containment:";
  for (const int rank : {0, 5}) {
    ExperimentConfig cfg;
    cfg.d = 12;
    cfg.l = 5;
    cfg.m_agents = 3;
    cfg.k_arms = 6;
    cfg.t_rounds = 1500;
    cfg.noise_r = 0.0;
    cfg.env.arm_rank = rank;
    cfg.theory_mode = true;
    cfg.seed = 424211 + rank;
    cfg.schedule.mode = "uniform";
    TrialResult r = run_trial(cfg, 0);
    const TheoryCheck* c = r.theory.find("noiseless_containment");
    const bool ok = c != nullptr && c->passed && c->evaluations > 0;
    pass &= ok;
    detail += fmt(" rank=%s worst (lhs-beta)/(1+beta) %.3e over %ld comms;",
                  rank == 0 ? "full" : "5", c != nullptr ? c->worst_residual : 1.0,
                  c != nullptr ? c->evaluations : 0);
  }
  report(10, pass, detail);
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  std::printf("%d/10 criteria passed in %.1fs\n", 10 - g_failures,
              seconds_since(start));
  return g_failures == 0 ? 0 : 1;
}
