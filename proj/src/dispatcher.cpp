#include "fsclb/dispatcher.hpp"

#include "fsclb/errors.hpp"

namespace fsclb {

ServerDispatcher::ServerDispatcher(const BanditParams& params, bool theory_mode)
    : params_(params),
      theory_mode_(theory_mode),
      server_(make_server(params, theory_mode)),
      fedlin_(make_fedlin_server(params)) {}

void ServerDispatcher::reset() {
  std::lock_guard<std::mutex> lock(mu_);
  server_ = make_server(params_, theory_mode_);
  fedlin_ = make_fedlin_server(params_);
}

Frame ServerDispatcher::handle_frame(const Frame& request) {
  std::lock_guard<std::mutex> lock(mu_);
  switch (frame_type_of(request)) {
    case frame_type::kUpload:
    case frame_type::kUploadWithGram: {
      const UploadMsg msg = deserialize_upload(request);
      const DownloadMsg reply = handle_upload(server_, msg, params_);
      return serialize_download(reply, msg.agent_id, msg.round);
    }
    case frame_type::kFedLinUpload: {
      const FedLinUploadMsg msg = deserialize_fedlin_upload(request);
      const FedLinDownloadMsg reply = fedlin_handle_upload(fedlin_, msg, params_);
      return serialize_fedlin_download(reply, msg.agent_id, msg.round);
    }
    case frame_type::kReset: {
      server_ = make_server(params_, theory_mode_);
      fedlin_ = make_fedlin_server(params_);
      return make_control_frame(frame_type::kResetAck,
                                static_cast<std::uint32_t>(params_.l),
                                static_cast<std::uint32_t>(params_.d));
    }
    case frame_type::kShutdown: {
      shutdown_requested_ = true;
      return make_control_frame(frame_type::kShutdownAck, 0, 0);
    }
    default:
      throw ProtocolError("unknown frame type");
  }
}

}  // namespace fsclb
