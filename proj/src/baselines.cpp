#include "fsclb/baselines.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "fsclb/errors.hpp"
#include "fsclb/spectral.hpp"

namespace fsclb {

FedLinAgentState make_fedlin_agent(int id, const BanditParams& params) {
  FedLinAgentState agent;
  agent.id = id;
  agent.v_global_inv =
      Matrix::Identity(params.d, params.d) / params.lambda;
  agent.theta_hat = Vector::Zero(params.d);
  agent.beta = compute_beta(params, 0.0);
  agent.dv_loc = Matrix::Zero(params.d, params.d);
  agent.db_loc = Vector::Zero(params.d);
  agent.log_det_v = params.d * std::log(params.lambda);
  agent.v_cache = Matrix::Identity(params.d, params.d) * params.lambda;
  return agent;
}

FedLinServerState make_fedlin_server(const BanditParams& params) {
  FedLinServerState server;
  server.v = Matrix::Identity(params.d, params.d) * params.lambda;
  server.b = Vector::Zero(params.d);
  server.log_det_v = params.d * std::log(params.lambda);
  return server;
}

int fedlin_select_arm(const FedLinAgentState& agent,
                      const std::vector<Vector>& arms,
                      const BanditParams& params) {
  if (arms.empty()) throw NoArms("fedlin_select_arm: empty decision set");
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(arms.size()); ++i) {
    const Vector& x = arms[i];
    if (x.size() != params.d) {
      throw InvalidVector("fedlin_select_arm: arm dimension mismatch");
    }
    if (x.norm() > params.arm_norm + 1e-9) {
      throw InvalidVector("fedlin_select_arm: arm norm exceeds L");
    }
    const double q = x.dot(agent.v_global_inv * x);
    const double score =
        agent.theta_hat.dot(x) + agent.beta * std::sqrt(std::max(q, 0.0));
    if (score > best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

void fedlin_local_update(FedLinAgentState& agent, const Vector& x,
                         double reward) {
  if (x.size() != agent.db_loc.size()) {
    throw InvalidVector("fedlin_local_update: dimension mismatch");
  }
  agent.dv_loc += x * x.transpose();
  agent.db_loc += reward * x;
}

std::pair<double, bool> fedlin_evaluate_trigger(const FedLinAgentState& agent,
                                                const BanditParams& params) {
  const double log_det1 = spd_log_det(agent.v_cache + agent.dv_loc);
  return {log_det1, det_trigger_fires(log_det1, agent.log_det_v, params.alpha)};
}

FedLinDownloadMsg fedlin_handle_upload(FedLinServerState& server,
                                       const FedLinUploadMsg& msg,
                                       const BanditParams& params) {
  if (msg.dv.rows() != params.d || msg.dv.cols() != params.d ||
      msg.db.size() != params.d) {
    throw ProtocolError("fedlin_handle_upload: payload shape mismatch");
  }
  server.v += msg.dv;
  server.b += msg.db;
  Eigen::LLT<Matrix> llt(server.v);
  if (llt.info() != Eigen::Success) {
    throw InvalidState("fedlin_handle_upload: singular design matrix");
  }
  FedLinDownloadMsg out;
  out.v_inv = llt.solve(Matrix::Identity(params.d, params.d));
  out.theta_hat = llt.solve(server.b);
  server.log_det_v = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.log_det = server.log_det_v;
  return out;
}

void fedlin_apply_download(FedLinAgentState& agent,
                           const FedLinDownloadMsg& msg,
                           const BanditParams& params) {
  if (msg.v_inv.rows() != params.d || msg.v_inv.cols() != params.d ||
      msg.theta_hat.size() != params.d) {
    throw ProtocolError("fedlin_apply_download: payload shape mismatch");
  }
  agent.v_global_inv = msg.v_inv;
  agent.theta_hat = msg.theta_hat;
  agent.log_det_v = msg.log_det;
  agent.beta = compute_beta(params, 0.0);
  Eigen::LLT<Matrix> llt(msg.v_inv);
  if (llt.info() != Eigen::Success) {
    throw InvalidState("fedlin_apply_download: downloaded inverse not SPD");
  }
  agent.v_cache = llt.solve(Matrix::Identity(params.d, params.d));
  agent.dv_loc = Matrix::Zero(params.d, params.d);
  agent.db_loc = Vector::Zero(params.d);
}

FedLinUploadMsg fedlin_make_upload(const FedLinAgentState& agent,
                                   std::uint64_t round) {
  FedLinUploadMsg msg;
  msg.agent_id = static_cast<std::uint32_t>(agent.id);
  msg.round = round;
  msg.dv = agent.dv_loc;
  msg.db = agent.db_loc;
  return msg;
}

int random_select(int num_arms, Rng& rng) {
  if (num_arms < 1) throw NoArms("random_select: empty decision set");
  return rng.uniform_int(num_arms);
}

}  // namespace fsclb
