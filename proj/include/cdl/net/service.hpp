// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <string>

#include "cdl/app/batch_file.hpp"
#include "cdl/he/backend.hpp"
#include "cdl/net/wire.hpp"
#include "cdl/nn/model.hpp"

namespace cdl::net {

struct ServerConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::uint32_t max_payload = kDefaultMaxPayload;
  std::chrono::milliseconds io_timeout{60000};
  // Parameters a client may ask for; guards memory use.
  std::size_t max_slots = std::size_t{1} << 16;
  std::size_t max_ring_degree = std::size_t{1} << 15;
};

// One job: PARAMS, PUBKEY, CIPHERBATCH in, then one RESULT per logit. Any
// failure is reported as a single ERROR frame before the connection closes.
// Never throws.
void serve_connection(Connection& c, const nn::ModelSpec& m, const ServerConfig& cfg);

// Thread-per-connection server over a read-only model.
class Server {
 public:
  Server(const nn::ModelSpec& m, ServerConfig cfg);

  std::uint16_t port() const { return listener_.port(); }
  // Accepts until stop() is called or `max_connections` (0 = unbounded)
  // connections were handled, then waits for in-flight jobs.
  void run(std::size_t max_connections = 0);
  void stop();
  std::size_t handled() const { return handled_.load(); }

 private:
  const nn::ModelSpec& model_;
  ServerConfig cfg_;
  Listener listener_;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> handled_{0};
};

// Client side of one job. `be` must be built from `params`; the returned
// batch has the same layout the file pipeline writes.
app::CipherBatch send_job(const std::string& host, std::uint16_t port, const he::Backend& be,
                          const he::PublicKey& pk, const he::RelinKey& rk, const app::CipherBatch& batch,
                          std::chrono::milliseconds timeout = std::chrono::seconds(600));

}  // namespace cdl::net
