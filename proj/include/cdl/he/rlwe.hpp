// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <vector>

#include "cdl/he/backend.hpp"
#include "cdl/he/modarith.hpp"

namespace cdl::he {

// Scale-invariant leveled scheme over Z_Q[x]/(x^n + 1) in RNS form. Q is a
// product of ~60-bit NTT primes sized so that L ciphertext products fit;
// ciphertext products go through an auxiliary base P (Halevi-Polyakov-Shoup
// scaling) and are relinearised with an RNS digit decomposition. Slots are
// the NTT-domain values of the plaintext polynomial mod p. Levels are a
// counter; there is no modulus chain.
class RlweBackend final : public Backend {
 public:
  explicit RlweBackend(HEParams params);
  ~RlweBackend() override;

  std::size_t ring_degree() const { return params_.n; }
  std::size_t q_count() const;
  std::size_t p_count() const;
  const std::vector<u64>& q_primes() const;
  double log2_q() const;

  KeySet keygen(std::span<const std::uint8_t> seed) const override;
  using Backend::encrypt;
  Ciphertext encrypt(const PublicKey& pk, std::span<const std::uint64_t> slots, Prng& rng) const override;
  Slots decrypt(const SecretKey& sk, const Ciphertext& ct) const override;
  // Exact: reconstructs every coefficient of t*(c0 + c1 s) mod Q with GMP.
  double measure_noise_budget(const SecretKey& sk, const Ciphertext& ct) const override;

  Ciphertext add(const Ciphertext& a, const Ciphertext& b) const override;
  Ciphertext add_many(std::span<const Ciphertext* const> cts) const override;
  Ciphertext add_plain(const Ciphertext& ct, std::span<const std::uint64_t> plain) const override;
  Ciphertext add_scalar(const Ciphertext& ct, std::uint64_t s) const override;
  Ciphertext mul(const Ciphertext& a, const Ciphertext& b, const RelinKey& rk) const override;
  Ciphertext mul_plain(const Ciphertext& ct, std::span<const std::uint64_t> plain) const override;
  Ciphertext mul_scalar(const Ciphertext& ct, std::uint64_t s) const override;
  Ciphertext linear_combination(std::span<const Ciphertext* const> cts,
                                std::span<const std::uint64_t> scalars) const override;
  void check(const Ciphertext& ct) const override;

  // Noise estimate (bits of z = t*(c0 + c1 s) mod Q) the analytic model
  // assigns to fresh ciphertexts and to a product of two ciphertexts.
  double fresh_noise_bits() const;
  double product_noise_bits(double z_a, double z_b) const;

 protected:
  void check_values(const Ciphertext& ct) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cdl::he
