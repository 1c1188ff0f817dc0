// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <thread>

#include "cdl/app/pipeline.hpp"
#include "cdl/error.hpp"
#include "cdl/modelio/fixtures.hpp"
#include "cdl/net/service.hpp"
#include "cdl/net/wire.hpp"
#include "support/wire_fuzz.hpp"

namespace cdl::net {
namespace {

TEST(Wire, HeaderLayout) {
  const he::Bytes b = encode_frame({MsgType::CipherBatch, he::Bytes(0x010203, 0xaa)});
  ASSERT_EQ(b.size(), kHeaderSize + 0x010203);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "CDL1");
  EXPECT_EQ(b[4], 3);
  EXPECT_EQ(b[5], 0x00);  // big-endian length
  EXPECT_EQ(b[6], 0x01);
  EXPECT_EQ(b[7], 0x02);
  EXPECT_EQ(b[8], 0x03);
  const FrameHeader h = parse_header(std::span(b).first(kHeaderSize));
  EXPECT_EQ(h.type, MsgType::CipherBatch);
  EXPECT_EQ(h.length, 0x010203u);
}

TEST(Wire, HeaderRejections) {
  he::Bytes h = encode_frame({MsgType::Params, {}});
  for (std::uint8_t t : {0, 6, 255}) {
    he::Bytes bad = h;
    bad[4] = t;
    EXPECT_THROW(parse_header(bad), TransportError);
  }
  he::Bytes bad = h;
  bad[3] = '2';
  EXPECT_THROW(parse_header(bad), TransportError);
  bad = encode_frame({MsgType::Params, he::Bytes(100)});
  EXPECT_THROW(parse_header(std::span(bad).first(kHeaderSize), 99), TransportError);
  EXPECT_THROW(parse_header(std::span(bad).first(5)), TransportError);
}

TEST(Wire, Payloads) {
  const auto be = he::make_backend(he::HEParams::simulator(97, 2, 8));
  const he::KeySet k = be->keygen(he::Bytes{1});
  const auto [pk, rk] = decode_pubkey_payload(encode_pubkey_payload(k.pub, k.relin));
  EXPECT_EQ(pk, k.pub);
  EXPECT_EQ(rk, k.relin);
  EXPECT_THROW(decode_pubkey_payload(encode_pubkey_payload(k.pub, be->keygen(he::Bytes{2}).relin)), ValidationError);
  he::Bytes swapped;
  {
    he::ByteWriter w;
    for (const he::KeyMaterial* m : {static_cast<const he::KeyMaterial*>(&k.relin), static_cast<const he::KeyMaterial*>(&k.pub)}) {
      const he::Bytes b = he::serialize_key(*m);
      w.u32(static_cast<std::uint32_t>(b.size()));
      w.raw(b);
    }
    swapped = w.take();
  }
  EXPECT_THROW(decode_pubkey_payload(swapped), ValidationError);

  const he::Bytes ct{1, 2, 3};
  const he::Bytes r = encode_result_payload(2, 5, ct);
  const ResultPart part = decode_result_payload(r);
  EXPECT_EQ(part.index, 2u);
  EXPECT_EQ(part.total, 5u);
  EXPECT_EQ(he::Bytes(part.ciphertext.begin(), part.ciphertext.end()), ct);
  EXPECT_THROW(decode_result_payload(encode_result_payload(5, 5, ct)), ValidationError);

  const ErrorInfo e = decode_error_payload(encode_error_payload(3, "depth"));
  EXPECT_EQ(e.code, 3);
  EXPECT_EQ(e.message, "depth");
}

class ServiceTest : public ::testing::TestWithParam<he::BackendKind> {
 protected:
  void SetUp() override {
    model = modelio::model_spec(modelio::gen_fixture_model(3));
    params = nn::recommend_params(model, GetParam(), GetParam() == he::BackendKind::Rlwe ? 1024 : 64);
    job = cdl::testing::make_job(model, params, 64, 11);
    ServerConfig cfg;
    cfg.io_timeout = std::chrono::seconds(5);
    server = std::make_unique<Server>(model, cfg);
    thread = std::thread([this] { server->run(); });
  }
  void TearDown() override {
    server->stop();
    thread.join();
  }

  app::CipherBatch batch(const he::Backend& be) const { return app::parse_batch(job.frames[2].payload, be); }

  nn::ModelSpec model;
  he::HEParams params;
  cdl::testing::WireJob job;
  std::unique_ptr<Server> server;
  std::thread thread;
};

TEST_P(ServiceTest, TcpResultIsByteIdenticalToFilePath) {
  const auto be = he::make_backend(params);
  const app::CipherBatch in = batch(*be);
  const app::CipherBatch file_path = app::infer_batch(*be, job.keys.relin, model, in);
  const app::CipherBatch tcp = send_job("127.0.0.1", server->port(), *be, job.keys.pub, job.keys.relin, in);
  EXPECT_EQ(app::serialize_batch(tcp), app::serialize_batch(file_path));
  const auto plain = nn::infer_plain(model, modelio::to_instances(modelio::gen_images(11, 64, 8, 8).images, model));
  EXPECT_EQ(app::decrypt_batch(*be, job.keys.secret, tcp), plain);
}

TEST_P(ServiceTest, ConcurrentClientsAreIndependent) {
  const auto be = he::make_backend(params);
  const app::CipherBatch in = batch(*be);
  const he::Bytes expect = app::serialize_batch(app::infer_batch(*be, job.keys.relin, model, in));
  std::vector<he::Bytes> got(3);
  std::vector<std::thread> clients;
  for (std::size_t i = 0; i < got.size(); ++i) {
    clients.emplace_back([&, i] {
      got[i] = app::serialize_batch(send_job("127.0.0.1", server->port(), *be, job.keys.pub, job.keys.relin, in));
    });
  }
  for (auto& t : clients) t.join();
  for (const he::Bytes& g : got) EXPECT_EQ(g, expect);
}

TEST_P(ServiceTest, ServerErrorsCarryExitCategories) {
  // Plaintext modulus the model was not quantized for.
  he::HEParams other = params;
  other.p = 65537;
  other.n = std::min<std::size_t>(other.n, 64);
  if (other.backend == he::BackendKind::Rlwe) other.slot_count = other.n;
  const auto be = he::make_backend(other);
  const he::KeySet k = be->keygen(he::Bytes{3});
  app::CipherBatch b{other.backend, k.pub.key_id, model.input_shape, 1, {}};
  for (std::size_t i = 0; i < model.input_shape.size(); ++i) b.cts.push_back(be->encrypt(k.pub, he::Slots(be->slot_count())));
  EXPECT_THROW(send_job("127.0.0.1", server->port(), *be, k.pub, k.relin, b), ValidationError);
}

TEST_P(ServiceTest, MalformedStreamsGetAnErrorFrame) {
  const auto exchange = [&](const std::vector<he::Bytes>& chunks) {
    Connection c = connect_to("127.0.0.1", server->port(), std::chrono::seconds(10));
    for (const auto& ch : chunks) c.write_raw(ch);
    c.shutdown_write();
    std::vector<Frame> replies;
    while (auto f = c.read_frame()) replies.push_back(*f);
    return replies;
  };
  const auto enc = [](const Frame& f) { return encode_frame(f); };
  const std::vector<std::vector<he::Bytes>> cases = {
      {},                                                                // nothing at all
      {he::Bytes{'C', 'D', 'L'}},                                       // partial header
      {he::Bytes(32, 0)},                                               // bad magic
      {enc(job.frames[1])},                                             // PUBKEY first
      {enc(job.frames[0]), enc(job.frames[2])},                         // PUBKEY missing
      {enc({MsgType::Params, he::Bytes{'{'}})},                         // bad JSON
      {enc(job.frames[0]), enc(job.frames[1])},                         // stops before the batch
      {enc(job.frames[0]), enc(job.frames[1]), enc({MsgType::CipherBatch, {}})},
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const std::vector<Frame> r = exchange(cases[i]);
    ASSERT_EQ(r.size(), 1u) << "case " << i;
    EXPECT_EQ(r[0].type, MsgType::Error) << "case " << i;
  }
  // The server still serves a well-formed job afterwards.
  const auto ok = exchange({enc(job.frames[0]), enc(job.frames[1]), enc(job.frames[2])});
  ASSERT_EQ(ok.size(), model.classes);
  for (const Frame& f : ok) EXPECT_EQ(f.type, MsgType::Result);
}

TEST_P(ServiceTest, ShortFuzzRunNeverHangsOrGoesSilent) {
  const cdl::testing::FuzzStats st = cdl::testing::fuzz_wire(server->port(), job, 300, 1);
  EXPECT_GE(st.frames, 300u);
  EXPECT_EQ(st.hung, 0u);
  EXPECT_EQ(st.silent, 0u);
  EXPECT_EQ(st.error_replies + st.result_replies, st.connections);
  EXPECT_GT(st.error_replies, st.connections / 2);
}

INSTANTIATE_TEST_SUITE_P(Backends, ServiceTest, ::testing::Values(he::BackendKind::Simulator, he::BackendKind::Rlwe),
                         [](const auto& info) { return he::to_string(info.param); });

TEST(Service, ConnectFailureIsATransportError) {
  const auto be = he::make_backend(he::HEParams::simulator(97, 2, 8));
  const he::KeySet k = be->keygen(he::Bytes{1});
  Listener probe("127.0.0.1", 0);
  const std::uint16_t port = probe.port();
  probe.close();
  app::CipherBatch b{be->kind(), k.pub.key_id, nn::Shape{{1}}, 1, {be->encrypt(k.pub, he::Slots(8))}};
  EXPECT_THROW(send_job("127.0.0.1", port, *be, k.pub, k.relin, b), TransportError);
}

}  // namespace
}  // namespace cdl::net
