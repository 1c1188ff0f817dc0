// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cdl/he/ciphertext.hpp"
#include "cdl/he/params.hpp"
#include "cdl/he/prng.hpp"

namespace cdl::he {

using Slots = std::vector<std::uint64_t>;

// Common interface of the two backends. Operations never modify their
// inputs. Plaintext vectors and scalars must already be reduced mod p.
class Backend {
 public:
  explicit Backend(HEParams params);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const HEParams& params() const { return params_; }
  BackendKind kind() const { return params_.backend; }
  std::size_t slot_count() const { return params_.slot_count; }
  std::uint64_t p() const { return params_.p; }

  virtual KeySet keygen(std::span<const std::uint8_t> seed) const = 0;

  virtual Ciphertext encrypt(const PublicKey& pk, std::span<const std::uint64_t> slots, Prng& rng) const = 0;
  // Draws randomness from a fresh OS-seeded generator.
  Ciphertext encrypt(const PublicKey& pk, std::span<const std::uint64_t> slots) const;

  // Throws NoiseExhausted when the ciphertext is no longer decryptable
  // (including decryption under the wrong key).
  virtual Slots decrypt(const SecretKey& sk, const Ciphertext& ct) const = 0;

  // Remaining headroom in bits measured against the secret key.
  virtual double measure_noise_budget(const SecretKey& sk, const Ciphertext& ct) const = 0;
  // Bookkept estimate carried by the ciphertext.
  double noise_budget(const Ciphertext& ct) const { return ct.noise_budget; }

  virtual Ciphertext add(const Ciphertext& a, const Ciphertext& b) const = 0;
  virtual Ciphertext add_many(std::span<const Ciphertext* const> cts) const = 0;
  virtual Ciphertext add_plain(const Ciphertext& ct, std::span<const std::uint64_t> plain) const = 0;
  virtual Ciphertext add_scalar(const Ciphertext& ct, std::uint64_t s) const = 0;
  virtual Ciphertext mul(const Ciphertext& a, const Ciphertext& b, const RelinKey& rk) const = 0;
  virtual Ciphertext mul_plain(const Ciphertext& ct, std::span<const std::uint64_t> plain) const = 0;
  virtual Ciphertext mul_scalar(const Ciphertext& ct, std::uint64_t s) const = 0;
  // sum_i scalars[i] * cts[i]; equivalent to mul_scalar followed by adds.
  virtual Ciphertext linear_combination(std::span<const Ciphertext* const> cts,
                                        std::span<const std::uint64_t> scalars) const = 0;
  // Cyclic left rotation of the slot vector.
  virtual Ciphertext rotate(const Ciphertext& ct, int steps) const;

  // coeffs ascending, reduced mod p. Powers come from a balanced product
  // tree, so degree d costs ceil(log2 d) levels.
  Ciphertext eval_poly(const Ciphertext& ct, std::span<const std::uint64_t> coeffs, const RelinKey& rk) const;

  // Throws ValidationError unless ct has the shape these params imply.
  virtual void check(const Ciphertext& ct) const = 0;

  Bytes serialize(const Ciphertext& ct) const { return serialize_ct(ct); }
  Ciphertext deserialize(std::span<const std::uint8_t> bytes) const;

 protected:
  // Range checks for untrusted input; check() only looks at the shape.
  virtual void check_values(const Ciphertext&) const {}
  void check_plain(std::span<const std::uint64_t> plain, bool allow_short) const;
  void check_key(const KeyMaterial& key, KeyKind kind) const;

  HEParams params_;
};

std::unique_ptr<Backend> make_backend(const HEParams& params);

// Levels consumed by eval_poly for a polynomial of the given degree.
int poly_depth(int degree);

}  // namespace cdl::he
