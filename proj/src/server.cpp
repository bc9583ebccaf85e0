#include "fsclb/server.hpp"

#include <cmath>
#include <utility>

#include "fsclb/errors.hpp"

namespace fsclb {

ServerState make_server(const BanditParams& params, bool theory_mode) {
  ServerState server;
  server.sketch = make_sketch(params.l, params.d);
  server.rho_ser = 0.0;
  server.b_ser = Vector::Zero(params.d);
  server.delta_ser = 0.0;
  server.hdiag = Vector::Constant(params.l, 1.0 / params.lambda);
  server.sigma_hat = Vector::Zero(params.l);
  server.log_det_v = params.d * std::log(params.lambda);
  if (theory_mode) server.theory_gram = Matrix::Zero(params.d, params.d);
  return server;
}

DownloadMsg handle_upload(ServerState& server, const UploadMsg& msg,
                          const BanditParams& params) {
  if (msg.s_loc.rows() != params.l || msg.s_loc.cols() != params.d ||
      msg.b_loc.size() != params.d) {
    throw ProtocolError("handle_upload: payload shape mismatch");
  }
  if (msg.rho_loc < 0.0) {
    throw ProtocolError("handle_upload: negative rho_loc");
  }

  server.rho_ser += msg.rho_loc;
  if (server.theory_gram && msg.theory_gram) {
    *server.theory_gram += *msg.theory_gram;
  }

  auto [merged, truncated] = scfd_merge(server.sketch, msg.s_loc);
  server.sketch = std::move(merged);
  server.sketch.rho += truncated;

  // Delta is tracked incrementally and revalidated against its definition.
  server.delta_ser += msg.rho_loc + truncated;
  const double expected = server.rho_ser + server.sketch.rho;
  if (std::abs(server.delta_ser - expected) >
      1e-9 * (1.0 + std::abs(expected))) {
    throw InvalidState("handle_upload: Delta drifted from rho_ser + rho~_ser");
  }

  server.b_ser += msg.b_loc;

  const double c = params.lambda + server.delta_ser;
  server.sigma_hat = server.sketch.s.rowwise().norm();
  server.hdiag =
      (server.sigma_hat.array().square() + c).inverse().matrix();
  server.log_det_v = det_from_singvals(server.sigma_hat, c, params.d).log_value;

  DownloadMsg out;
  out.s = server.sketch.s;
  out.theta_hat =
      woodbury_inverse_apply(server.sketch.s, server.hdiag, c, server.b_ser);
  out.log_det = server.log_det_v;
  out.hdiag = server.hdiag;
  out.delta = server.delta_ser;
  return out;
}

Matrix server_design_matrix(const ServerState& server,
                            const BanditParams& params) {
  Matrix v = server.sketch.s.transpose() * server.sketch.s;
  v.diagonal().array() += params.lambda + server.delta_ser;
  return v;
}

}  // namespace fsclb
