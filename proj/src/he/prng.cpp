// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/he/prng.hpp"

#include <sodium.h>

#include <bit>
#include <cstring>
#include <stdexcept>

namespace cdl::he {

namespace {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium failed to initialise");
}

}  // namespace

Prng::Prng(std::span<const std::uint8_t> seed, std::string_view domain) {
  ensure_sodium();
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, key_.size());
  const std::uint64_t dlen = domain.size();
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(&dlen), sizeof(dlen));
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(domain.data()), domain.size());
  crypto_generichash_update(&st, seed.data(), seed.size());
  crypto_generichash_final(&st, key_.data(), key_.size());
}

Prng Prng::from_os_entropy() {
  ensure_sodium();
  std::array<std::uint8_t, 32> seed{};
  randombytes_buf(seed.data(), seed.size());
  return Prng(seed, "os");
}

void Prng::refill() {
  std::array<unsigned char, crypto_stream_chacha20_NONCEBYTES> nonce{};
  std::memcpy(nonce.data(), &block_, sizeof(block_));
  ++block_;
  crypto_stream_chacha20(buf_.data(), buf_.size(), nonce.data(), key_.data());
  pos_ = 0;
}

void Prng::fill(std::span<std::uint8_t> out) {
  for (std::uint8_t& b : out) {
    if (pos_ == buf_.size()) refill();
    b = buf_[pos_++];
  }
}

std::uint64_t Prng::next_u64() {
  if (pos_ + 8 > buf_.size()) refill();
  std::uint64_t v;
  std::memcpy(&v, buf_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

std::uint64_t Prng::uniform(std::uint64_t bound) {
  if (bound <= 1) return 0;
  if (std::has_single_bit(bound)) return next_u64() & (bound - 1);
  const std::uint64_t mask = std::bit_ceil(bound) - 1;
  for (;;) {
    const std::uint64_t v = next_u64() & mask;
    if (v < bound) return v;
  }
}

int Prng::ternary() { return static_cast<int>(uniform(3)) - 1; }

int Prng::centered_binomial(int eta) {
  int acc = 0;
  int left = 2 * eta;
  while (left > 0) {
    const int take = left < 64 ? left : 64;
    std::uint64_t bits = next_u64();
    if (take < 64) bits &= (std::uint64_t{1} << take) - 1;
    // Even-indexed bits count positive, odd-indexed negative.
    acc += std::popcount(bits & 0x5555555555555555ULL) - std::popcount(bits & 0xAAAAAAAAAAAAAAAAULL);
    left -= take;
  }
  return acc;
}

std::array<std::uint8_t, 16> short_hash(std::span<const std::uint8_t> data, std::string_view domain) {
  ensure_sodium();
  std::array<std::uint8_t, 16> out{};
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, out.size());
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(domain.data()), domain.size());
  crypto_generichash_update(&st, data.data(), data.size());
  crypto_generichash_final(&st, out.data(), out.size());
  return out;
}

}  // namespace cdl::he
