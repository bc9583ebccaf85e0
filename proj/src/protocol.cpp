#include "fsclb/protocol.hpp"

#include <cstring>

#include "fsclb/errors.hpp"

namespace fsclb {

namespace {

void put_u32(Frame& f, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) f.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Frame& f, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) f.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(Frame& f, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(f, bits);
}

class Reader {
 public:
  explicit Reader(const Frame& f) : frame_(f) {}

  std::uint8_t u8() {
    need(1);
    return frame_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(frame_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(frame_[pos_++]) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  void finish() const {
    if (pos_ != frame_.size()) throw ProtocolError("frame has trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > frame_.size()) throw ProtocolError("truncated frame");
  }
  const Frame& frame_;
  std::size_t pos_ = 0;
};

struct Header {
  std::uint8_t type;
  std::uint32_t agent_id;
  std::uint64_t round;
  std::uint32_t l;
  std::uint32_t d;
};

void put_header(Frame& f, const Header& h) {
  f.push_back(h.type);
  put_u32(f, h.agent_id);
  put_u64(f, h.round);
  put_u32(f, h.l);
  put_u32(f, h.d);
}

Header read_header(Reader& r) {
  Header h;
  h.type = r.u8();
  h.agent_id = r.u32();
  h.round = r.u64();
  h.l = r.u32();
  h.d = r.u32();
  if (h.l > (1u << 20) || h.d > (1u << 20)) {
    throw ProtocolError("implausible header dimensions");
  }
  return h;
}

void put_matrix(Frame& f, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(f, m(i, j));
}

Matrix read_matrix(Reader& r, int rows, int cols) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = r.f64();
  return m;
}

void put_vector(Frame& f, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(f, v[i]);
}

Vector read_vector(Reader& r, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = r.f64();
  return v;
}

}  // namespace

Frame serialize_upload(const UploadMsg& msg) {
  const auto l = static_cast<std::uint32_t>(msg.s_loc.rows());
  const auto d = static_cast<std::uint32_t>(msg.s_loc.cols());
  const std::uint8_t type =
      msg.theory_gram ? frame_type::kUploadWithGram : frame_type::kUpload;
  Frame f;
  f.reserve(kHeaderBytes + 8 * (static_cast<std::size_t>(l) * d + d + 1));
  put_header(f, Header{type, msg.agent_id, msg.round, l, d});
  put_matrix(f, msg.s_loc);
  put_vector(f, msg.b_loc);
  put_f64(f, msg.rho_loc);
  if (msg.theory_gram) put_matrix(f, *msg.theory_gram);
  return f;
}

UploadMsg deserialize_upload(const Frame& frame) {
  Reader r(frame);
  const Header h = read_header(r);
  if (h.type != frame_type::kUpload && h.type != frame_type::kUploadWithGram) {
    throw ProtocolError("deserialize_upload: wrong frame type");
  }
  UploadMsg msg;
  msg.agent_id = h.agent_id;
  msg.round = h.round;
  msg.s_loc = read_matrix(r, static_cast<int>(h.l), static_cast<int>(h.d));
  msg.b_loc = read_vector(r, static_cast<int>(h.d));
  msg.rho_loc = r.f64();
  if (h.type == frame_type::kUploadWithGram) {
    msg.theory_gram = read_matrix(r, static_cast<int>(h.d), static_cast<int>(h.d));
  }
  r.finish();
  return msg;
}

Frame serialize_download(const DownloadMsg& msg, std::uint32_t agent_id,
                         std::uint64_t round) {
  const auto l = static_cast<std::uint32_t>(msg.s.rows());
  const auto d = static_cast<std::uint32_t>(msg.s.cols());
  Frame f;
  f.reserve(kHeaderBytes + 8 * (static_cast<std::size_t>(l) * d + d + l + 2));
  put_header(f, Header{frame_type::kDownload, agent_id, round, l, d});
  put_matrix(f, msg.s);
  put_vector(f, msg.theta_hat);
  put_vector(f, msg.hdiag);
  put_f64(f, msg.log_det);
  put_f64(f, msg.delta);
  return f;
}

DownloadMsg deserialize_download(const Frame& frame) {
  Reader r(frame);
  const Header h = read_header(r);
  if (h.type != frame_type::kDownload) {
    throw ProtocolError("deserialize_download: wrong frame type");
  }
  DownloadMsg msg;
  msg.s = read_matrix(r, static_cast<int>(h.l), static_cast<int>(h.d));
  msg.theta_hat = read_vector(r, static_cast<int>(h.d));
  msg.hdiag = read_vector(r, static_cast<int>(h.l));
  msg.log_det = r.f64();
  msg.delta = r.f64();
  r.finish();
  return msg;
}

Frame serialize_fedlin_upload(const FedLinUploadMsg& msg) {
  const auto d = static_cast<std::uint32_t>(msg.dv.rows());
  Frame f;
  f.reserve(kHeaderBytes + 8 * (static_cast<std::size_t>(d) * d + d));
  put_header(f, Header{frame_type::kFedLinUpload, msg.agent_id, msg.round, 0, d});
  put_matrix(f, msg.dv);
  put_vector(f, msg.db);
  return f;
}

FedLinUploadMsg deserialize_fedlin_upload(const Frame& frame) {
  Reader r(frame);
  const Header h = read_header(r);
  if (h.type != frame_type::kFedLinUpload) {
    throw ProtocolError("deserialize_fedlin_upload: wrong frame type");
  }
  FedLinUploadMsg msg;
  msg.agent_id = h.agent_id;
  msg.round = h.round;
  msg.dv = read_matrix(r, static_cast<int>(h.d), static_cast<int>(h.d));
  msg.db = read_vector(r, static_cast<int>(h.d));
  r.finish();
  return msg;
}

Frame serialize_fedlin_download(const FedLinDownloadMsg& msg,
                                std::uint32_t agent_id, std::uint64_t round) {
  const auto d = static_cast<std::uint32_t>(msg.v_inv.rows());
  Frame f;
  f.reserve(kHeaderBytes + 8 * (static_cast<std::size_t>(d) * d + d + 1));
  put_header(f, Header{frame_type::kFedLinDownload, agent_id, round, 0, d});
  put_matrix(f, msg.v_inv);
  put_vector(f, msg.theta_hat);
  put_f64(f, msg.log_det);
  return f;
}

FedLinDownloadMsg deserialize_fedlin_download(const Frame& frame) {
  Reader r(frame);
  const Header h = read_header(r);
  if (h.type != frame_type::kFedLinDownload) {
    throw ProtocolError("deserialize_fedlin_download: wrong frame type");
  }
  FedLinDownloadMsg msg;
  msg.v_inv = read_matrix(r, static_cast<int>(h.d), static_cast<int>(h.d));
  msg.theta_hat = read_vector(r, static_cast<int>(h.d));
  msg.log_det = r.f64();
  r.finish();
  return msg;
}

Frame make_control_frame(std::uint8_t type, std::uint32_t l, std::uint32_t d) {
  Frame f;
  put_header(f, Header{type, 0, 0, l, d});
  return f;
}

std::uint8_t frame_type_of(const Frame& frame) {
  if (frame.empty()) throw ProtocolError("empty frame");
  return frame[0];
}

std::size_t message_volume(const UploadMsg& msg) {
  return static_cast<std::size_t>(msg.s_loc.rows()) * msg.s_loc.cols() +
         msg.b_loc.size() + 1;
}

std::size_t message_volume(const DownloadMsg& msg) {
  return static_cast<std::size_t>(msg.s.rows()) * msg.s.cols() +
         msg.theta_hat.size() + msg.hdiag.size() + 2;
}

std::size_t message_volume(const FedLinUploadMsg& m) {
  return static_cast<std::size_t>(m.dv.rows()) * m.dv.cols() + m.db.size();
}

std::size_t message_volume(const FedLinDownloadMsg& m) {
  return static_cast<std::size_t>(m.v_inv.rows()) * m.v_inv.cols() +
         m.theta_hat.size() + 1;
}

std::size_t upload_volume(int l, int d) {
  return static_cast<std::size_t>(l) * d + d + 1;
}

std::size_t download_volume(int l, int d) {
  return static_cast<std::size_t>(l) * d + d + l + 2;
}

std::size_t fedlin_upload_volume(int d) {
  return static_cast<std::size_t>(d) * d;
}

std::size_t fedlin_download_volume(int d) {
  return static_cast<std::size_t>(d) * d + d + 1;
}

std::size_t fedlin_paper_volume(int d) {
  return static_cast<std::size_t>(d) * d + d;
}

void CommLedger::record(std::size_t up_scalars, std::size_t down_scalars) {
  switching_count += 1;
  uploaded_scalars += up_scalars;
  downloaded_scalars += down_scalars;
  uploaded_bytes += kHeaderBytes + 8 * up_scalars;
  downloaded_bytes += kHeaderBytes + 8 * down_scalars;
}

}  // namespace fsclb
