#pragma once

#include <mutex>

#include "fsclb/agent.hpp"
#include "fsclb/baselines.hpp"
#include "fsclb/server.hpp"
#include "fsclb/transport.hpp"

namespace fsclb {

// Server-side frame router: holds the FSCLB and FedLinUCB server states and
// serializes all access, matching the one-upload-at-a-time model.
class ServerDispatcher : public Endpoint {
 public:
  ServerDispatcher(const BanditParams& params, bool theory_mode);

  Frame handle_frame(const Frame& request) override;

  void reset();

  // Direct views for the theory suite (in-process runs only).
  const ServerState& fsclb_state() const { return server_; }
  const FedLinServerState& fedlin_state() const { return fedlin_; }
  bool shutdown_requested() const { return shutdown_requested_; }

 private:
  BanditParams params_;
  bool theory_mode_ = false;
  ServerState server_;
  FedLinServerState fedlin_;
  bool shutdown_requested_ = false;
  std::mutex mu_;
};

}  // namespace fsclb
