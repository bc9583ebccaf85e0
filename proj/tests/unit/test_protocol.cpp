#include <doctest.h>

#include "fsclb/dispatcher.hpp"
#include "fsclb/errors.hpp"
#include "fsclb/protocol.hpp"
#include "fsclb/rng.hpp"
#include "fsclb/transport.hpp"

using namespace fsclb;

namespace {

UploadMsg random_upload_msg(int l, int d, Rng& rng) {
  UploadMsg msg;
  msg.agent_id = static_cast<std::uint32_t>(rng.uniform_int(1000));
  msg.round = rng.next_u64() % 100000;
  msg.s_loc = Matrix(l, d);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < d; ++j) msg.s_loc(i, j) = rng.gaussian();
  msg.rho_loc = std::abs(rng.gaussian());
  msg.b_loc = Vector(d);
  for (int j = 0; j < d; ++j) msg.b_loc[j] = rng.gaussian();
  return msg;
}

}  // namespace

TEST_CASE("upload frame layout: 21-byte header plus 8 bytes per scalar") {
  UploadMsg msg;
  msg.agent_id = 3;
  msg.round = 9;
  msg.s_loc = Matrix::Zero(1, 2);
  msg.b_loc = Vector::Zero(2);
  msg.rho_loc = 0.25;
  const Frame f = serialize_upload(msg);
  // payload carries l*d + d + 1 = 5 scalars
  CHECK(f.size() == kHeaderBytes + 8 * upload_volume(1, 2));
  CHECK(f.size() == 61);
  CHECK(f[0] == frame_type::kUpload);
}

TEST_CASE("upload/download round-trip is field-exact") {
  Rng rng(9201);
  for (int i = 0; i < 1000; ++i) {
    const int l = 1 + rng.uniform_int(5);
    const int d = l + 1 + rng.uniform_int(6);
    const UploadMsg msg = random_upload_msg(l, d, rng);
    const UploadMsg back = deserialize_upload(serialize_upload(msg));
    CHECK(back.agent_id == msg.agent_id);
    CHECK(back.round == msg.round);
    CHECK((back.s_loc - msg.s_loc).norm() == 0.0);
    CHECK((back.b_loc - msg.b_loc).norm() == 0.0);
    CHECK(back.rho_loc == msg.rho_loc);
    CHECK_FALSE(back.theory_gram.has_value());

    DownloadMsg down;
    down.s = msg.s_loc;
    down.theta_hat = msg.b_loc;
    down.log_det = rng.gaussian();
    down.hdiag = Vector(l);
    for (int k = 0; k < l; ++k) down.hdiag[k] = rng.uniform();
    down.delta = std::abs(rng.gaussian());
    const DownloadMsg dback =
        deserialize_download(serialize_download(down, msg.agent_id, msg.round));
    CHECK((dback.s - down.s).norm() == 0.0);
    CHECK((dback.theta_hat - down.theta_hat).norm() == 0.0);
    CHECK(dback.log_det == down.log_det);
    CHECK((dback.hdiag - down.hdiag).norm() == 0.0);
    CHECK(dback.delta == down.delta);
  }
}

TEST_CASE("theory gram rides along under its own frame type") {
  Rng rng(9202);
  UploadMsg msg = random_upload_msg(2, 4, rng);
  msg.theory_gram = Matrix::Identity(4, 4);
  const Frame f = serialize_upload(msg);
  CHECK(f[0] == frame_type::kUploadWithGram);
  const UploadMsg back = deserialize_upload(f);
  REQUIRE(back.theory_gram.has_value());
  CHECK((*back.theory_gram - *msg.theory_gram).norm() == 0.0);
  // the side channel is not part of the countable payload
  CHECK(message_volume(msg) == upload_volume(2, 4));
}

TEST_CASE("fedlin messages round-trip") {
  Rng rng(9203);
  FedLinUploadMsg up;
  up.agent_id = 7;
  up.round = 11;
  up.dv = Matrix(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) up.dv(i, j) = rng.gaussian();
  up.db = Vector(3);
  for (int j = 0; j < 3; ++j) up.db[j] = rng.gaussian();
  const FedLinUploadMsg uback = deserialize_fedlin_upload(serialize_fedlin_upload(up));
  CHECK((uback.dv - up.dv).norm() == 0.0);
  CHECK((uback.db - up.db).norm() == 0.0);

  FedLinDownloadMsg down;
  down.v_inv = up.dv;
  down.theta_hat = up.db;
  down.log_det = 0.5;
  const FedLinDownloadMsg dback =
      deserialize_fedlin_download(serialize_fedlin_download(down, 7, 11));
  CHECK((dback.v_inv - down.v_inv).norm() == 0.0);
  CHECK((dback.theta_hat - down.theta_hat).norm() == 0.0);
  CHECK(dback.log_det == down.log_det);
}

TEST_CASE("malformed frames raise ProtocolError") {
  Rng rng(9204);
  const UploadMsg msg = random_upload_msg(1, 3, rng);
  Frame f = serialize_upload(msg);

  Frame cut(f.begin(), f.begin() + 30);
  CHECK_THROWS_AS(deserialize_upload(cut), ProtocolError);

  Frame bad_type = f;
  bad_type[0] = 0x77;
  CHECK_THROWS_AS(deserialize_upload(bad_type), ProtocolError);

  Frame trailing = f;
  trailing.push_back(0);
  CHECK_THROWS_AS(deserialize_upload(trailing), ProtocolError);

  CHECK_THROWS_AS(frame_type_of(Frame{}), ProtocolError);
}

TEST_CASE("message volumes follow the closed forms") {
  CHECK(upload_volume(40, 100) == 4101);
  CHECK(download_volume(40, 100) == 4142);
  CHECK(fedlin_paper_volume(100) == 10100);
  CHECK(fedlin_upload_volume(100) == 10000);
  CHECK(fedlin_download_volume(100) == 10101);

  UploadMsg msg;
  msg.s_loc = Matrix::Zero(40, 100);
  msg.b_loc = Vector::Zero(100);
  CHECK(message_volume(msg) == 4101);
  DownloadMsg down;
  down.s = Matrix::Zero(40, 100);
  down.theta_hat = Vector::Zero(100);
  down.hdiag = Vector::Zero(40);
  CHECK(message_volume(down) == 4142);
  FedLinUploadMsg fup;
  fup.dv = Matrix::Zero(100, 100);
  fup.db = Vector::Zero(100);
  CHECK(message_volume(fup) == 10100);
}

TEST_CASE("ledger tracks the closed forms per communication") {
  CommLedger ledger;
  for (int i = 0; i < 3; ++i) {
    ledger.record(upload_volume(20, 50), download_volume(20, 50));
  }
  CHECK(ledger.switching_count == 3);
  CHECK(ledger.uploaded_scalars == 3 * 1051);
  CHECK(ledger.downloaded_scalars == 3 * download_volume(20, 50));
  CHECK(ledger.total_scalars() ==
        3 * (2 * 20 * 50 + 2 * 50 + 20 + 3));
  CHECK(ledger.uploaded_bytes == 3 * (kHeaderBytes + 8 * 1051));
}

TEST_CASE("tcp loopback round-trips frames through the dispatcher") {
  BanditParams p;
  p.d = 4;
  p.l = 2;
  p.num_agents = 1;
  p.t_horizon = 10;
  ServerDispatcher dispatcher(p, false);
  TcpServer server(dispatcher, 0);
  server.start();

  {
    TcpClientTransport client("127.0.0.1", server.port());
    const Frame ack = client.roundtrip(make_control_frame(frame_type::kReset, 2, 4));
    CHECK(frame_type_of(ack) == frame_type::kResetAck);

    UploadMsg msg;
    msg.agent_id = 0;
    msg.round = 1;
    msg.s_loc = Matrix::Zero(2, 4);
    msg.s_loc(0, 0) = 1.0;
    msg.rho_loc = 0.0;
    msg.b_loc = Vector::Zero(4);
    msg.b_loc[0] = 1.0;

    ServerDispatcher reference(p, false);
    InprocTransport ref_transport(reference);

    const Frame via_tcp = client.roundtrip(serialize_upload(msg));
    const Frame via_ref = ref_transport.roundtrip(serialize_upload(msg));
    CHECK(via_tcp == via_ref);  // byte-identical replies
  }
  server.stop();
}

TEST_CASE("connecting to a closed port raises TransportError") {
  CHECK_THROWS_AS(TcpClientTransport("127.0.0.1", 1), TransportError);
}
