// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/net/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "cdl/error.hpp"

namespace cdl::net {

std::string to_string(MsgType t) {
  switch (t) {
    case MsgType::Params: return "PARAMS";
    case MsgType::PubKey: return "PUBKEY";
    case MsgType::CipherBatch: return "CIPHERBATCH";
    case MsgType::Result: return "RESULT";
    case MsgType::Error: return "ERROR";
  }
  return "UNKNOWN";
}

he::Bytes encode_frame(const Frame& f) {
  if (f.payload.size() > 0xffffffffu) throw TransportError("frame payload too large");
  he::Bytes out(kFrameMagic.begin(), kFrameMagic.end());
  out.push_back(static_cast<std::uint8_t>(f.type));
  const auto n = static_cast<std::uint32_t>(f.payload.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(n >> shift));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

FrameHeader parse_header(std::span<const std::uint8_t> h, std::uint32_t max_payload) {
  if (h.size() != kHeaderSize) throw TransportError("short frame header");
  if (!std::equal(kFrameMagic.begin(), kFrameMagic.end(), h.begin())) throw TransportError("bad frame magic");
  if (h[4] < 1 || h[4] > 5) throw TransportError("unknown message type " + std::to_string(h[4]));
  const std::uint32_t len = (std::uint32_t{h[5]} << 24) | (std::uint32_t{h[6]} << 16) | (std::uint32_t{h[7]} << 8) | h[8];
  if (len > max_payload) throw TransportError("frame payload of " + std::to_string(len) + " bytes exceeds the limit");
  return {static_cast<MsgType>(h[4]), len};
}

// ------------------------------------------------------------ payloads

he::Bytes encode_pubkey_payload(const he::PublicKey& pk, const he::RelinKey& rk) {
  he::ByteWriter w;
  for (const he::KeyMaterial* k : {static_cast<const he::KeyMaterial*>(&pk), static_cast<const he::KeyMaterial*>(&rk)}) {
    const he::Bytes b = he::serialize_key(*k);
    w.u32(static_cast<std::uint32_t>(b.size()));
    w.raw(b);
  }
  return w.take();
}

std::pair<he::PublicKey, he::RelinKey> decode_pubkey_payload(std::span<const std::uint8_t> payload) {
  he::ByteReader r(payload);
  auto pk = he::key_as<he::PublicKey>(he::deserialize_key(r.raw(r.u32())), he::KeyKind::Public);
  auto rk = he::key_as<he::RelinKey>(he::deserialize_key(r.raw(r.u32())), he::KeyKind::Relin);
  if (!r.done()) throw ValidationError("trailing bytes in PUBKEY payload");
  if (pk.key_id != rk.key_id) throw ValidationError("public and relinearization keys come from different key pairs");
  return {std::move(pk), std::move(rk)};
}

he::Bytes encode_result_payload(std::uint32_t index, std::uint32_t total, std::span<const std::uint8_t> ct) {
  he::ByteWriter w;
  w.u32(index);
  w.u32(total);
  w.raw(ct);
  return w.take();
}

ResultPart decode_result_payload(std::span<const std::uint8_t> payload) {
  he::ByteReader r(payload);
  ResultPart p;
  p.index = r.u32();
  p.total = r.u32();
  p.ciphertext = r.raw(r.remaining());
  if (p.total == 0 || p.index >= p.total) throw ValidationError("RESULT index out of range");
  return p;
}

he::Bytes encode_error_payload(int code, const std::string& message) {
  he::Bytes out;
  out.push_back(static_cast<std::uint8_t>(code));
  out.insert(out.end(), message.begin(), message.end());
  return out;
}

ErrorInfo decode_error_payload(std::span<const std::uint8_t> payload) {
  if (payload.empty()) return {};
  return {payload[0], std::string(payload.begin() + 1, payload.end())};
}

// ------------------------------------------------------------ sockets

namespace {

[[noreturn]] void sys_fail(const std::string& what) { throw TransportError(what + ": " + std::strerror(errno)); }

void set_timeouts(int fd, std::chrono::milliseconds t) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(t.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((t.count() % 1000) * 1000);
  setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

Connection::Connection(int fd, std::chrono::milliseconds timeout) : fd_(fd) { set_timeouts(fd_, timeout); }

Connection::~Connection() {
  if (fd_ >= 0) ::close(fd_);
}

Connection::Connection(Connection&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }

bool Connection::read_exact(std::uint8_t* dst, std::size_t n, bool eof_ok) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd_, dst + got, n - got, 0);
    if (r == 0) {
      if (eof_ok && got == 0) return false;
      throw TransportError("connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw TransportError("read timed out");
      sys_fail("recv");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

std::optional<Frame> Connection::read_frame(std::uint32_t max_payload) {
  std::array<std::uint8_t, kHeaderSize> h;
  if (!read_exact(h.data(), h.size(), true)) return std::nullopt;
  const FrameHeader hdr = parse_header(h, max_payload);
  Frame f{hdr.type, {}};
  // Grow with the data actually received rather than trusting the length.
  constexpr std::size_t kChunk = 1 << 20;
  while (f.payload.size() < hdr.length) {
    const std::size_t n = std::min<std::size_t>(kChunk, hdr.length - f.payload.size());
    const std::size_t at = f.payload.size();
    f.payload.resize(at + n);
    read_exact(f.payload.data() + at, n, false);
  }
  return f;
}

void Connection::write_raw(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t r = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw TransportError("write timed out");
      sys_fail("send");
    }
    sent += static_cast<std::size_t>(r);
  }
}

void Connection::write_frame(const Frame& f) { write_raw(encode_frame(f)); }

void Connection::shutdown_write() { ::shutdown(fd_, SHUT_WR); }

void Connection::drain(std::chrono::milliseconds budget) {
  const auto deadline = std::chrono::steady_clock::now() + budget;
  set_timeouts(fd_, std::chrono::milliseconds(100));
  std::uint8_t sink[16384];
  while (std::chrono::steady_clock::now() < deadline) {
    const ssize_t r = ::recv(fd_, sink, sizeof sink, 0);
    if (r == 0) return;
    if (r < 0 && errno != EINTR && errno != EAGAIN && errno != EWOULDBLOCK) return;
  }
}

Connection connect_to(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw TransportError("resolve " + host + ": " + ::gai_strerror(rc));
  }
  std::string last = "no addresses";
  for (addrinfo* a = res; a; a = a->ai_next) {
    const int fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      return Connection(fd, timeout);
    }
    last = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw TransportError("connect " + host + ":" + service + ": " + last);
}

Listener::Listener(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) sys_fail("socket");
  int one = 1;
  setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw TransportError("listen address must be an IPv4 literal: " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 64) != 0) {
    const std::string err = std::strerror(errno);
    ::close(fd_);
    throw TransportError("bind " + host + ":" + std::to_string(port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

int Listener::accept_fd() {
  for (;;) {
    const int c = ::accept(fd_, nullptr, nullptr);
    if (c >= 0) return c;
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return -1;
  }
}

// shutdown() wakes a thread blocked in accept(); the descriptor itself is
// released by the destructor.
void Listener::close() { ::shutdown(fd_, SHUT_RDWR); }

}  // namespace cdl::net
