// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/net/service.hpp"

#include <list>
#include <memory>
#include <thread>

#include "cdl/app/pipeline.hpp"
#include "cdl/error.hpp"

namespace cdl::net {

namespace {

Frame expect(Connection& c, MsgType type, std::uint32_t max_payload) {
  std::optional<Frame> f = c.read_frame(max_payload);
  if (!f) throw TransportError("connection closed before " + to_string(type));
  if (f->type != type) throw TransportError("expected " + to_string(type) + ", got " + to_string(f->type));
  return std::move(*f);
}

std::string as_text(const he::Bytes& b) { return std::string(b.begin(), b.end()); }

void run_job(Connection& c, const nn::ModelSpec& m, const ServerConfig& cfg) {
  const he::HEParams params = he::params_from_json(as_text(expect(c, MsgType::Params, cfg.max_payload).payload));
  he::validate(params);
  if (params.slot_count > cfg.max_slots || params.n > cfg.max_ring_degree) {
    throw ValidationError("parameters exceed the server limits");
  }
  if (params.p != m.p) {
    throw ValidationError("model needs plaintext modulus " + std::to_string(m.p) + ", client sent " +
                          std::to_string(params.p));
  }
  const auto be = he::make_backend(params);

  auto [pk, rk] = decode_pubkey_payload(expect(c, MsgType::PubKey, cfg.max_payload).payload);
  if (pk.backend != params.backend) throw ValidationError("keys belong to a different backend");

  const app::CipherBatch in = app::parse_batch(expect(c, MsgType::CipherBatch, cfg.max_payload).payload, *be);
  if (in.key_id != pk.key_id) throw ValidationError("batch was encrypted under a different public key");
  const app::CipherBatch out = app::infer_batch(*be, rk, m, in);

  const auto total = static_cast<std::uint32_t>(out.cts.size());
  for (std::uint32_t i = 0; i < total; ++i) {
    c.write_frame({MsgType::Result, encode_result_payload(i, total, he::serialize_ct(out.cts[i]))});
  }
}

}  // namespace

void serve_connection(Connection& c, const nn::ModelSpec& m, const ServerConfig& cfg) {
  try {
    run_job(c, m, cfg);
  } catch (const std::exception& e) {
    try {
      c.write_frame({MsgType::Error, encode_error_payload(exit_code_of(e), e.what())});
    } catch (const std::exception&) {
      // peer already gone
    }
  }
  c.shutdown_write();
  c.drain();
}

Server::Server(const nn::ModelSpec& m, ServerConfig cfg)
    : model_(m), cfg_(std::move(cfg)), listener_(cfg_.host, cfg_.port) {}

void Server::run(std::size_t max_connections) {
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::list<Worker> workers;
  const auto reap = [&](bool all) {
    for (auto it = workers.begin(); it != workers.end();) {
      if (all || it->done->load()) {
        it->thread.join();
        it = workers.erase(it);
      } else {
        ++it;
      }
    }
  };
  std::size_t accepted = 0;
  while (!stopping_.load() && (max_connections == 0 || accepted < max_connections)) {
    const int fd = listener_.accept_fd();
    if (fd < 0) break;
    ++accepted;
    auto done = std::make_shared<std::atomic<bool>>(false);
    workers.push_back({std::thread([this, fd, done] {
                         try {
                           Connection c(fd, cfg_.io_timeout);
                           serve_connection(c, model_, cfg_);
                         } catch (...) {
                         }
                         ++handled_;
                         done->store(true);
                       }),
                       done});
    reap(false);
  }
  reap(true);
}

void Server::stop() {
  stopping_.store(true);
  listener_.close();
}

app::CipherBatch send_job(const std::string& host, std::uint16_t port, const he::Backend& be,
                          const he::PublicKey& pk, const he::RelinKey& rk, const app::CipherBatch& batch,
                          std::chrono::milliseconds timeout) {
  if (batch.count == 0 || batch.cts.empty()) throw ValidationError("empty batch");
  Connection c = connect_to(host, port, timeout);
  const std::string params = he::params_to_json(be.params());
  c.write_frame({MsgType::Params, he::Bytes(params.begin(), params.end())});
  c.write_frame({MsgType::PubKey, encode_pubkey_payload(pk, rk)});
  c.write_frame({MsgType::CipherBatch, app::serialize_batch(batch)});

  app::CipherBatch out{be.kind(), batch.key_id, {}, batch.count, {}};
  std::vector<bool> seen;
  std::size_t received = 0;
  while (std::optional<Frame> f = c.read_frame()) {
    if (f->type == MsgType::Error) {
      const ErrorInfo e = decode_error_payload(f->payload);
      const std::string msg = "server: " + e.message;
      switch (e.code) {
        case 2: throw ValidationError(msg);
        case 3: throw CapacityError(msg);
        case 4: throw NoiseExhausted(msg);
        default: throw TransportError(msg);
      }
    }
    if (f->type != MsgType::Result) throw TransportError("unexpected " + to_string(f->type) + " frame from server");
    const ResultPart part = decode_result_payload(f->payload);
    if (out.cts.empty()) {
      if (part.total > (1u << 24)) throw TransportError("server announced too many results");
      out.cts.resize(part.total);
      seen.assign(part.total, false);
    }
    if (part.total != out.cts.size() || seen[part.index]) throw TransportError("inconsistent RESULT frames");
    out.cts[part.index] = be.deserialize(part.ciphertext);
    seen[part.index] = true;
    ++received;
  }
  if (received == 0 || received != out.cts.size()) throw TransportError("server closed before sending every result");
  out.shape.dims = {out.cts.size()};
  return out;
}

}  // namespace cdl::net
