// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

// Mutation fuzzer for the inference service wire protocol. Shared by the
// unit tests and the acceptance runner.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdl/app/pipeline.hpp"
#include "cdl/error.hpp"
#include "cdl/he/backend.hpp"
#include "cdl/modelio/fixtures.hpp"
#include "cdl/net/service.hpp"

namespace cdl::testing {

// A small valid job: params, keys and an encrypted batch for `m`.
struct WireJob {
  he::HEParams params;
  he::KeySet keys;
  std::vector<net::Frame> frames;  // PARAMS, PUBKEY, CIPHERBATCH
};

inline WireJob make_job(const nn::ModelSpec& m, const he::HEParams& params, std::size_t instances, std::uint64_t seed) {
  WireJob j;
  j.params = params;
  const auto be = he::make_backend(params);
  const he::Bytes s{static_cast<std::uint8_t>(seed), static_cast<std::uint8_t>(seed >> 8), 'w'};
  j.keys = be->keygen(s);
  he::Prng rng(s, "wire-job");
  const modelio::Dataset d = modelio::gen_images(seed, instances, m.input_shape.dims[1], m.input_shape.dims[2]);
  const app::CipherBatch b = app::encrypt_batch(*be, j.keys.pub, m, modelio::to_instances(d.images, m), rng);
  const std::string text = he::params_to_json(params);
  j.frames = {{net::MsgType::Params, he::Bytes(text.begin(), text.end())},
              {net::MsgType::PubKey, net::encode_pubkey_payload(j.keys.pub, j.keys.relin)},
              {net::MsgType::CipherBatch, app::serialize_batch(b)}};
  return j;
}

struct FuzzStats {
  std::size_t frames = 0;       // frames (or frame-sized garbage chunks) sent
  std::size_t connections = 0;
  std::size_t error_replies = 0;   // connections answered with ERROR
  std::size_t result_replies = 0;  // connections answered with results only
  std::size_t silent = 0;          // closed or reset without any reply
  std::size_t hung = 0;         // the client timed out waiting for the server
};

// Opens connections to 127.0.0.1:port until `frames` frames were sent, each
// connection carrying a mutated copy of a prefix of `job`.
inline FuzzStats fuzz_wire(std::uint16_t port, const WireJob& job, std::size_t frames, std::uint64_t seed) {
  he::Prng rng(he::Bytes{static_cast<std::uint8_t>(seed), static_cast<std::uint8_t>(seed >> 8)}, "wire-fuzz");
  FuzzStats st;
  const auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng.uniform(n)); };
  while (st.frames < frames) {
    std::vector<net::Frame> fs(job.frames.begin(), job.frames.begin() + 1 + pick(3));
    std::vector<he::Bytes> wire;
    for (const net::Frame& f : fs) wire.push_back(net::encode_frame(f));
    he::Bytes& victim = wire[pick(wire.size())];
    switch (pick(9)) {
      case 0:  // flip bytes anywhere
        for (std::size_t k = 1 + pick(8); k > 0; --k) victim[pick(victim.size())] ^= static_cast<std::uint8_t>(1 + pick(255));
        break;
      case 1:  // corrupt the header
        victim[pick(net::kHeaderSize)] = static_cast<std::uint8_t>(rng.next_u64());
        break;
      case 2:  // bad type byte
        victim[4] = static_cast<std::uint8_t>(pick(2) ? 0 : 6 + pick(250));
        break;
      case 3: {  // length field lies
        const std::uint32_t len = static_cast<std::uint32_t>(rng.next_u64());
        for (int b = 0; b < 4; ++b) victim[5 + b] = static_cast<std::uint8_t>(len >> (24 - 8 * b));
        break;
      }
      case 4:  // truncate
        victim.resize(pick(victim.size()));
        break;
      case 5: {  // pure garbage
        victim.resize(pick(64));
        for (auto& b : victim) b = static_cast<std::uint8_t>(rng.next_u64());
        break;
      }
      case 6:  // frames out of order
        std::swap(wire.front(), wire.back());
        break;
      case 7:  // payload bytes mutated behind a valid header
        if (victim.size() > net::kHeaderSize) {
          for (std::size_t k = 1 + pick(4); k > 0; --k) {
            victim[net::kHeaderSize + pick(victim.size() - net::kHeaderSize)] ^= static_cast<std::uint8_t>(1 + pick(255));
          }
        }
        break;
      default:  // unexpected extra RESULT / ERROR frame injected
        wire.insert(wire.begin() + static_cast<std::ptrdiff_t>(pick(wire.size() + 1)),
                    net::encode_frame({pick(2) ? net::MsgType::Result : net::MsgType::Error, he::Bytes(pick(16), 7)}));
        break;
    }
    ++st.connections;
    st.frames += wire.size();
    try {
      net::Connection c = net::connect_to("127.0.0.1", port, std::chrono::seconds(20));
      try {
        for (const he::Bytes& w : wire) c.write_raw(w);
      } catch (const TransportError&) {
        // the server may hang up early on garbage
      }
      c.shutdown_write();
      bool error = false, result = false;
      while (std::optional<net::Frame> f = c.read_frame()) {
        error |= f->type == net::MsgType::Error;
        result |= f->type == net::MsgType::Result;
      }
      if (error) ++st.error_replies;
      else if (result) ++st.result_replies;
      else ++st.silent;
    } catch (const TransportError& e) {
      if (std::string(e.what()).find("timed out") != std::string::npos) ++st.hung;
      else ++st.silent;
    }
  }
  return st;
}

}  // namespace cdl::testing
