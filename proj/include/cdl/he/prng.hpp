// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cdl::he {

// ChaCha20 keystream keyed by BLAKE2b(domain || seed). Not thread-safe; give
// each thread its own instance.
class Prng {
 public:
  Prng(std::span<const std::uint8_t> seed, std::string_view domain = "cdl");
  static Prng from_os_entropy();

  std::uint64_t next_u64();
  std::uint64_t uniform(std::uint64_t bound);  // unbiased in [0, bound)
  int ternary();                               // uniform in {-1, 0, 1}
  int centered_binomial(int eta);              // sum of eta coin differences
  void fill(std::span<std::uint8_t> out);

 private:
  void refill();

  std::array<std::uint8_t, 32> key_{};
  std::uint64_t block_ = 0;
  std::array<std::uint8_t, 4096> buf_{};
  std::size_t pos_ = sizeof(buf_);
};

// 16-byte BLAKE2b digest used to identify key sets.
std::array<std::uint8_t, 16> short_hash(std::span<const std::uint8_t> data, std::string_view domain);

}  // namespace cdl::he
