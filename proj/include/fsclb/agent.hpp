#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "fsclb/linalg.hpp"
#include "fsclb/protocol.hpp"
#include "fsclb/sketch.hpp"

namespace fsclb {

struct BanditParams {
  int d = 0;
  int l = 0;
  int num_agents = 1;   // M
  double lambda = 1.0;
  double alpha = 1.0;
  double delta_conf = 0.01;
  double noise_r = 0.1;  // R
  double s_norm = 1.0;   // bound on ||theta*||
  double arm_norm = 1.0; // bound on ||x||, L
  double t_horizon = 0;  // T
};

struct AgentState {
  int id = 0;
  Matrix policy_sketch;  // S_m, l x d, downloaded
  Vector hdiag;          // l, downloaded
  double delta = 0.0;    // Delta_m
  Vector theta_hat;      // d
  double beta = 0.0;
  double log_det_v = 0.0;  // cached log det of the downloaded V~
  SketchState local;       // S_loc with rho_loc
  Vector b_loc;            // d
  std::optional<Matrix> theory_gram;  // exact local gram, theory mode only
};

AgentState make_agent(int id, const BanditParams& params,
                      bool theory_mode = false);

// UCB selection: argmax <theta, x> + beta * sqrt(q(x)) with the matrix-free
// quadratic form. Ties break toward the lowest index.
int select_arm(const AgentState& agent, const std::vector<Vector>& arms,
               const BanditParams& params);

void local_update(AgentState& agent, const Vector& x, double reward);

// Strict determinant comparison in log space. Equality does not fire; ties
// within roundoff of the threshold count as equality so that different
// determinant routes resolve the boundary identically.
bool det_trigger_fires(double log_det1, double log_det_ref, double alpha);

// Returns (log det1, fire). Below the l < 0.4 d crossover the determinant
// comes from the singular values of the stacked sketches; above it from a
// Cholesky of the materialized d x d matrix. fire is strict.
std::pair<double, bool> evaluate_trigger(const AgentState& agent,
                                         const BanditParams& params);

double compute_beta(const BanditParams& params, double delta);

void apply_download(AgentState& agent, const DownloadMsg& msg,
                    const BanditParams& params);

UploadMsg make_upload(const AgentState& agent, std::uint64_t round);

}  // namespace fsclb
