// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cdl/he/backend.hpp"
#include "cdl/he/modarith.hpp"

namespace cdl::he {

// Computes on plaintext slots in Z_p and charges the configured noise model.
// A nonce and the key tag ride along in the second component so that
// encryptions differ and decryption under a foreign key is detected.
class SimulatorBackend final : public Backend {
 public:
  explicit SimulatorBackend(HEParams params);

  double fresh_budget() const { return params_.noise.fresh_per_level * params_.L; }

  KeySet keygen(std::span<const std::uint8_t> seed) const override;
  using Backend::encrypt;
  Ciphertext encrypt(const PublicKey& pk, std::span<const std::uint64_t> slots, Prng& rng) const override;
  Slots decrypt(const SecretKey& sk, const Ciphertext& ct) const override;
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
  Ciphertext rotate(const Ciphertext& ct, int steps) const override;
  void check(const Ciphertext& ct) const override;

 private:
  std::uint64_t tag_of(const KeyMaterial& key) const;
  std::uint64_t stored_tag(const KeyMaterial& key) const;

  Modulus mod_;
};

}  // namespace cdl::he
