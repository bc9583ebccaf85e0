#pragma once

#include <optional>

#include "fsclb/agent.hpp"
#include "fsclb/linalg.hpp"
#include "fsclb/protocol.hpp"
#include "fsclb/sketch.hpp"

namespace fsclb {

struct ServerState {
  SketchState sketch;      // S~_ser; sketch.rho is rho~_ser
  double rho_ser = 0.0;    // sum of uploaded rho_loc
  Vector b_ser;            // d
  double delta_ser = 0.0;  // rho_ser + rho~_ser, kept redundantly
  Vector hdiag;            // l
  Vector sigma_hat;        // l, last Sigma^ diagonal
  double log_det_v = 0.0;
  std::optional<Matrix> theory_gram;  // aggregate of uploaded exact grams
};

ServerState make_server(const BanditParams& params, bool theory_mode = false);

// Absorb one upload: accumulate rho, double-sketch merge, refresh Delta, b,
// H, theta and the log determinant, and emit the download payload.
DownloadMsg handle_upload(ServerState& server, const UploadMsg& msg,
                          const BanditParams& params);

// (lambda + Delta) I + S~^T S~, materialized. Theory-suite use only.
Matrix server_design_matrix(const ServerState& server,
                            const BanditParams& params);

}  // namespace fsclb
