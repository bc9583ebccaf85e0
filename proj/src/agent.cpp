#include "fsclb/agent.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "fsclb/errors.hpp"
#include "fsclb/spectral.hpp"

namespace fsclb {

namespace {

// log det(c I_d + B^T B) for a wide stack B (rows << d). The nonzero
// eigenvalues of B^T B are those of the small B B^T, so an O(rows^2 d)
// gram plus an O(rows^3) eigensolve replace a full SVD.
double log_det_from_stack(const Matrix& stack, double c, int d) {
  const Matrix gram = stack * stack.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  double log_det = (d - stack.rows()) * std::log(c);
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    log_det += std::log(std::max(eig.eigenvalues()[i], 0.0) + c);
  }
  return log_det;
}

}  // namespace

AgentState make_agent(int id, const BanditParams& params, bool theory_mode) {
  AgentState agent;
  agent.id = id;
  agent.policy_sketch = Matrix::Zero(params.l, params.d);
  agent.hdiag = Vector::Constant(params.l, 1.0 / params.lambda);
  agent.delta = 0.0;
  agent.theta_hat = Vector::Zero(params.d);
  agent.beta = compute_beta(params, 0.0);
  agent.log_det_v = params.d * std::log(params.lambda);
  agent.local = make_sketch(params.l, params.d);
  agent.b_loc = Vector::Zero(params.d);
  if (theory_mode) agent.theory_gram = Matrix::Zero(params.d, params.d);
  return agent;
}

int select_arm(const AgentState& agent, const std::vector<Vector>& arms,
               const BanditParams& params) {
  if (arms.empty()) throw NoArms("select_arm: empty decision set");
  const double c = params.lambda + agent.delta;
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(arms.size()); ++i) {
    const Vector& x = arms[i];
    if (x.size() != params.d) {
      throw InvalidVector("select_arm: arm dimension mismatch");
    }
    if (x.norm() > params.arm_norm + 1e-9) {
      throw InvalidVector("select_arm: arm norm exceeds L");
    }
    const double q =
        woodbury_quadratic_form(agent.policy_sketch, agent.hdiag, c, x);
    const double score =
        agent.theta_hat.dot(x) + agent.beta * std::sqrt(std::max(q, 0.0));
    if (score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

void local_update(AgentState& agent, const Vector& x, double reward) {
  agent.local = scfd_append(agent.local, x);
  agent.b_loc += reward * x;
  if (agent.theory_gram) *agent.theory_gram += x * x.transpose();
}

bool det_trigger_fires(double log_det1, double log_det_ref, double alpha) {
  const double threshold = std::log1p(alpha) + log_det_ref;
  return log_det1 - threshold > 1e-9 * (1.0 + std::abs(threshold));
}

std::pair<double, bool> evaluate_trigger(const AgentState& agent,
                                         const BanditParams& params) {
  const double c = params.lambda + agent.delta + agent.local.rho;
  double log_det1;
  if (params.l < 0.4 * params.d) {
    Matrix stack(2 * params.l, params.d);
    stack.topRows(params.l) = agent.policy_sketch;
    stack.bottomRows(params.l) = agent.local.s;
    log_det1 = log_det_from_stack(stack, c, params.d);
  } else {
    Matrix v1 = agent.policy_sketch.transpose() * agent.policy_sketch;
    v1 += agent.local.s.transpose() * agent.local.s;
    v1.diagonal().array() += c;
    log_det1 = spd_log_det(v1);
  }
  return {log_det1, det_trigger_fires(log_det1, agent.log_det_v, params.alpha)};
}

double compute_beta(const BanditParams& params, double delta) {
  if (params.delta_conf <= 0.0 || params.delta_conf >= 1.0) {
    throw InvalidConfidence("compute_beta: delta_conf must be in (0, 1)");
  }
  if (delta < 0.0) throw InvalidState("compute_beta: negative Delta");
  const double m = static_cast<double>(params.num_agents);
  const double m_tilde =
      std::sqrt(1.0 + m * params.alpha) + m * std::sqrt(2.0 * params.alpha);
  const double alpha_tilde = std::min(params.alpha, 1.0);
  const double log_arg =
      (1.0 + params.t_horizon * params.arm_norm * params.arm_norm /
                 (alpha_tilde * params.lambda)) /
      params.delta_conf;
  const double sqrt_lambda = std::sqrt(params.lambda);
  return m_tilde * (params.noise_r * std::sqrt(params.d * std::log(log_arg)) +
                    sqrt_lambda * params.s_norm) +
         (sqrt_lambda + std::sqrt(delta / params.lambda)) * params.s_norm;
}

void apply_download(AgentState& agent, const DownloadMsg& msg,
                    const BanditParams& params) {
  if (msg.s.rows() != params.l || msg.s.cols() != params.d ||
      msg.theta_hat.size() != params.d || msg.hdiag.size() != params.l) {
    throw ProtocolError("apply_download: payload shape mismatch");
  }
  agent.policy_sketch = msg.s;
  agent.hdiag = msg.hdiag;
  agent.delta = msg.delta;
  agent.theta_hat = msg.theta_hat;
  agent.log_det_v = msg.log_det;
  agent.beta = compute_beta(params, msg.delta);
  agent.local = make_sketch(params.l, params.d, agent.local.mode,
                            agent.local.rule);
  agent.b_loc = Vector::Zero(params.d);
  if (agent.theory_gram) *agent.theory_gram = Matrix::Zero(params.d, params.d);
}

UploadMsg make_upload(const AgentState& agent, std::uint64_t round) {
  UploadMsg msg;
  msg.agent_id = static_cast<std::uint32_t>(agent.id);
  msg.round = round;
  msg.s_loc = agent.local.s;
  msg.rho_loc = agent.local.rho;
  msg.b_loc = agent.b_loc;
  msg.theory_gram = agent.theory_gram;
  return msg;
}

}  // namespace fsclb
