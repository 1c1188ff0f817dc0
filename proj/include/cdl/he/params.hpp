// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace cdl::he {

enum class BackendKind : std::uint8_t { Simulator = 1, Rlwe = 2 };

std::string to_string(BackendKind b);
BackendKind backend_from_string(const std::string& s);

// Bit costs charged by the simulator. The fresh budget is
// fresh_per_level * L.
struct NoiseModel {
  double fresh_per_level = 16.0;
  double add = 1.0;
  double add_plain = 0.0;
  double mul_plain = 3.0;
  double mul = 6.0;
  double rotate = 2.0;

  bool operator==(const NoiseModel&) const = default;
};

struct HEParams {
  BackendKind backend = BackendKind::Simulator;
  std::uint64_t p = 65537;   // plaintext modulus
  int L = 6;                 // multiplicative levels
  int k = 80;                // claimed security bits, metadata only
  std::size_t n = 4096;      // ring degree (Rlwe)
  std::size_t slot_count = 8192;
  NoiseModel noise;          // Simulator only
  int q_count = 0;           // Rlwe: number of ciphertext primes, 0 = sized from L, p, n
  int plain_mults = 3;       // Rlwe sizing allowance for slot-wise plaintext products

  bool operator==(const HEParams&) const = default;

  static HEParams simulator(std::uint64_t p, int L, std::size_t slots = 8192);
  static HEParams rlwe(std::uint64_t p, int L, std::size_t n = 4096);
};

// Throws ValidationError when the parameters are unusable.
void validate(const HEParams& params);

std::string params_to_json(const HEParams& params, int indent = 2);
HEParams params_from_json(const std::string& text);
void save_params(const HEParams& params, const std::filesystem::path& path);
HEParams load_params(const std::filesystem::path& path);

// Smallest prime >= 2^48 congruent to 1 mod 16384; the wide plaintext modulus
// used when the model needs more than 17 bits of headroom.
std::uint64_t wide_plaintext_prime();

}  // namespace cdl::he
