#pragma once

#include <utility>
#include <vector>

#include "fsclb/agent.hpp"
#include "fsclb/linalg.hpp"
#include "fsclb/protocol.hpp"
#include "fsclb/rng.hpp"

namespace fsclb {

// FedLinUCB keeps the full d x d state; no sketching anywhere.
struct FedLinAgentState {
  int id = 0;
  Matrix v_global_inv;  // d x d, downloaded
  Vector theta_hat;
  double beta = 0.0;
  Matrix dv_loc;  // local gram increment
  Vector db_loc;
  double log_det_v = 0.0;
  // V reconstructed from the downloaded inverse; cached for the dense
  // determinant trigger.
  Matrix v_cache;
};

struct FedLinServerState {
  Matrix v;  // lambda I + all uploaded grams
  Vector b;
  double log_det_v = 0.0;
};

FedLinAgentState make_fedlin_agent(int id, const BanditParams& params);
FedLinServerState make_fedlin_server(const BanditParams& params);

int fedlin_select_arm(const FedLinAgentState& agent,
                      const std::vector<Vector>& arms,
                      const BanditParams& params);

void fedlin_local_update(FedLinAgentState& agent, const Vector& x,
                         double reward);

// Dense determinant trigger: det(V + dV) > (1 + alpha) det(V), in log space.
std::pair<double, bool> fedlin_evaluate_trigger(const FedLinAgentState& agent,
                                                const BanditParams& params);

FedLinDownloadMsg fedlin_handle_upload(FedLinServerState& server,
                                       const FedLinUploadMsg& msg,
                                       const BanditParams& params);

void fedlin_apply_download(FedLinAgentState& agent,
                           const FedLinDownloadMsg& msg,
                           const BanditParams& params);

FedLinUploadMsg fedlin_make_upload(const FedLinAgentState& agent,
                                   std::uint64_t round);

// Uniform arm index; throws NoArms when num_arms < 1.
int random_select(int num_arms, Rng& rng);

}  // namespace fsclb
