#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fsclb/linalg.hpp"

namespace fsclb {

using Frame = std::vector<std::uint8_t>;

// Frame layout: 21-byte header {type:1, agent_id:4, round:8, l:4, d:4},
// little-endian, followed by the payload as 64-bit little-endian floats.
namespace frame_type {
constexpr std::uint8_t kUpload = 0x01;            // S_loc rows, b_loc, rho_loc
constexpr std::uint8_t kDownload = 0x02;          // S rows, theta, H, log_det, Delta
constexpr std::uint8_t kFedLinUpload = 0x03;      // dV rows, db
constexpr std::uint8_t kFedLinDownload = 0x04;    // V_inv rows, theta, log_det
constexpr std::uint8_t kUploadWithGram = 0x05;    // kUpload + d*d exact gram
constexpr std::uint8_t kReset = 0x06;             // header only
constexpr std::uint8_t kResetAck = 0x07;          // header only
constexpr std::uint8_t kShutdown = 0x7f;          // header only
constexpr std::uint8_t kShutdownAck = 0x7e;       // header only
}  // namespace frame_type

struct UploadMsg {
  std::uint32_t agent_id = 0;
  std::uint64_t round = 0;
  Matrix s_loc;     // l x d
  double rho_loc = 0.0;
  Vector b_loc;     // d
  // Theory-mode side channel (exact local gram); never counted in Com(T).
  std::optional<Matrix> theory_gram;
};

struct DownloadMsg {
  Matrix s;          // l x d
  Vector theta_hat;  // d
  double log_det = 0.0;
  Vector hdiag;      // l
  double delta = 0.0;
};

struct FedLinUploadMsg {
  std::uint32_t agent_id = 0;
  std::uint64_t round = 0;
  Matrix dv;  // d x d
  Vector db;  // d
};

struct FedLinDownloadMsg {
  Matrix v_inv;      // d x d
  Vector theta_hat;  // d
  double log_det = 0.0;
};

Frame serialize_upload(const UploadMsg& msg);
UploadMsg deserialize_upload(const Frame& frame);

Frame serialize_download(const DownloadMsg& msg, std::uint32_t agent_id,
                         std::uint64_t round);
DownloadMsg deserialize_download(const Frame& frame);

Frame serialize_fedlin_upload(const FedLinUploadMsg& msg);
FedLinUploadMsg deserialize_fedlin_upload(const Frame& frame);

Frame serialize_fedlin_download(const FedLinDownloadMsg& msg,
                                std::uint32_t agent_id, std::uint64_t round);
FedLinDownloadMsg deserialize_fedlin_download(const Frame& frame);

Frame make_control_frame(std::uint8_t type, std::uint32_t l, std::uint32_t d);
std::uint8_t frame_type_of(const Frame& frame);

// Scalars actually carried by each message.
std::size_t message_volume(const UploadMsg& msg);      // l*d + d + 1
std::size_t message_volume(const DownloadMsg& msg);    // l*d + d + l + 2
std::size_t message_volume(const FedLinUploadMsg& m);  // d*d + d
std::size_t message_volume(const FedLinDownloadMsg& m);  // d*d + d + 1

// Closed forms used by the ledger.
std::size_t upload_volume(int l, int d);    // l*d + d + 1
std::size_t download_volume(int l, int d);  // l*d + d + l + 2
// FedLinUCB accounting convention: the upload is counted as the d x d
// correlation matrix alone, the download as V_inv + theta + det. The actual
// payload counts are reported separately via message_volume.
std::size_t fedlin_upload_volume(int d);    // d*d
std::size_t fedlin_download_volume(int d);  // d*d + d + 1
std::size_t fedlin_paper_volume(int d);     // d*d + d

constexpr std::size_t kHeaderBytes = 21;

struct CommLedger {
  std::uint64_t switching_count = 0;
  std::uint64_t uploaded_scalars = 0;
  std::uint64_t downloaded_scalars = 0;
  std::uint64_t uploaded_bytes = 0;
  std::uint64_t downloaded_bytes = 0;

  void record(std::size_t up_scalars, std::size_t down_scalars);
  std::uint64_t total_scalars() const {
    return uploaded_scalars + downloaded_scalars;
  }
};

}  // namespace fsclb
