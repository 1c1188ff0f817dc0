// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdl/he/ciphertext.hpp"

namespace cdl::net {

// Frame layout: "CDL1" | u8 type | u32 payload length (big-endian) | payload
enum class MsgType : std::uint8_t { Params = 1, PubKey = 2, CipherBatch = 3, Result = 4, Error = 5 };

std::string to_string(MsgType t);

inline constexpr std::array<std::uint8_t, 4> kFrameMagic{'C', 'D', 'L', '1'};
inline constexpr std::size_t kHeaderSize = 9;
inline constexpr std::uint32_t kDefaultMaxPayload = 1u << 30;

struct Frame {
  MsgType type = MsgType::Error;
  he::Bytes payload;

  bool operator==(const Frame&) const = default;
};

struct FrameHeader {
  MsgType type;
  std::uint32_t length;
};

he::Bytes encode_frame(const Frame& f);
// Throws TransportError on a bad magic, unknown type or oversized length.
FrameHeader parse_header(std::span<const std::uint8_t> header, std::uint32_t max_payload = kDefaultMaxPayload);

// Payloads. PUBKEY carries both evaluation keys the server needs:
//   u32 length | public key | u32 length | relinearization key
// RESULT carries one logit ciphertext: u32 index | u32 total | ciphertext.
// ERROR carries u8 exit code | UTF-8 message.
// Integers inside payloads are little-endian, like every other file format.
he::Bytes encode_pubkey_payload(const he::PublicKey& pk, const he::RelinKey& rk);
std::pair<he::PublicKey, he::RelinKey> decode_pubkey_payload(std::span<const std::uint8_t> payload);

struct ResultPart {
  std::uint32_t index = 0;
  std::uint32_t total = 0;
  std::span<const std::uint8_t> ciphertext;
};
he::Bytes encode_result_payload(std::uint32_t index, std::uint32_t total, std::span<const std::uint8_t> ct);
ResultPart decode_result_payload(std::span<const std::uint8_t> payload);

struct ErrorInfo {
  int code = 5;
  std::string message;
};
he::Bytes encode_error_payload(int code, const std::string& message);
ErrorInfo decode_error_payload(std::span<const std::uint8_t> payload);

// Blocking TCP stream. Every read and write honours the I/O timeout.
class Connection {
 public:
  explicit Connection(int fd, std::chrono::milliseconds timeout = std::chrono::seconds(60));
  ~Connection();
  Connection(Connection&& o) noexcept;
  Connection& operator=(Connection&&) = delete;
  Connection(const Connection&) = delete;

  // std::nullopt on an orderly close before the first header byte.
  std::optional<Frame> read_frame(std::uint32_t max_payload = kDefaultMaxPayload);
  void write_frame(const Frame& f);
  void write_raw(std::span<const std::uint8_t> bytes);
  void shutdown_write();
  // Discards unread input until the peer closes, so closing does not reset
  // the connection before the peer has read our last frame.
  void drain(std::chrono::milliseconds budget = std::chrono::seconds(2));
  int fd() const { return fd_; }

 private:
  // false when the peer closed before any byte arrived
  bool read_exact(std::uint8_t* dst, std::size_t n, bool eof_ok);

  int fd_;
};

Connection connect_to(const std::string& host, std::uint16_t port,
                      std::chrono::milliseconds timeout = std::chrono::seconds(60));

class Listener {
 public:
  // Port 0 picks an ephemeral port.
  Listener(const std::string& host, std::uint16_t port);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const { return port_; }
  // Returns -1 once close() was called.
  int accept_fd();
  void close();

 private:
  int fd_;
  std::uint16_t port_;
};

}  // namespace cdl::net
