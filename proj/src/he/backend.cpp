// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/he/backend.hpp"

#include <map>
#include <string>

#include "cdl/error.hpp"
#include "cdl/he/rlwe.hpp"
#include "cdl/he/simulator.hpp"

namespace cdl::he {

Backend::Backend(HEParams params) : params_(std::move(params)) { validate(params_); }

Ciphertext Backend::encrypt(const PublicKey& pk, std::span<const std::uint64_t> slots) const {
  Prng rng = Prng::from_os_entropy();
  return encrypt(pk, slots, rng);
}

Ciphertext Backend::rotate(const Ciphertext&, int) const {
  throw ValidationError("slot rotation is not supported by the " + to_string(kind()) + " backend");
}

Ciphertext Backend::deserialize(std::span<const std::uint8_t> bytes) const {
  Ciphertext ct = deserialize_ct(bytes, params_);
  check(ct);
  check_values(ct);
  return ct;
}

void Backend::check_plain(std::span<const std::uint64_t> plain, bool allow_short) const {
  if (plain.size() > slot_count() || (!allow_short && plain.size() != slot_count())) {
    throw ValidationError("plaintext has " + std::to_string(plain.size()) + " slots; backend holds " +
                          std::to_string(slot_count()));
  }
  for (std::uint64_t v : plain) {
    if (v >= params_.p) throw ValidationError("plaintext value " + std::to_string(v) + " is not reduced mod p");
  }
}

void Backend::check_key(const KeyMaterial& key, KeyKind kind) const {
  if (key.backend != params_.backend) throw ValidationError("key belongs to a different backend");
  if (key.kind != kind) throw ValidationError("wrong kind of key");
}

int poly_depth(int degree) {
  int d = 0;
  while ((1 << d) < degree) ++d;
  return d;
}

Ciphertext Backend::eval_poly(const Ciphertext& ct, std::span<const std::uint64_t> coeffs,
                              const RelinKey& rk) const {
  check(ct);
  for (std::uint64_t c : coeffs) {
    if (c >= params_.p) throw ValidationError("polynomial coefficient not reduced mod p");
  }
  int degree = static_cast<int>(coeffs.size()) - 1;
  while (degree > 0 && coeffs[static_cast<std::size_t>(degree)] == 0) --degree;
  const int depth = poly_depth(degree);
  if (depth > static_cast<int>(ct.level)) {
    throw LevelExhausted("degree-" + std::to_string(degree) + " polynomial needs " + std::to_string(depth) +
                         " levels; ciphertext has " + std::to_string(ct.level));
  }

  // power[k] = power[ceil(k/2)] * power[floor(k/2)], only for k we need.
  std::map<int, Ciphertext> power;
  power.emplace(1, ct);
  const auto get = [&](auto& self, int k) -> const Ciphertext& {
    auto it = power.find(k);
    if (it != power.end()) return it->second;
    const int hi = (k + 1) / 2;
    const int lo = k / 2;
    Ciphertext prod = mul(self(self, hi), self(self, lo), rk);
    return power.emplace(k, std::move(prod)).first->second;
  };

  std::vector<const Ciphertext*> terms;
  std::vector<std::uint64_t> scalars;
  for (int k = 1; k <= degree; ++k) {
    if (coeffs[static_cast<std::size_t>(k)] == 0) continue;
    terms.push_back(&get(get, k));
    scalars.push_back(coeffs[static_cast<std::size_t>(k)]);
  }
  const std::uint64_t c0 = coeffs.empty() ? 0 : coeffs[0];
  if (terms.empty()) {
    // Constant polynomial: zero out the input and add c0.
    return add_scalar(mul_scalar(ct, 0), c0);
  }
  Ciphertext acc = linear_combination(terms, scalars);
  return c0 == 0 ? acc : add_scalar(acc, c0);
}

std::unique_ptr<Backend> make_backend(const HEParams& params) {
  if (params.backend == BackendKind::Rlwe) return std::make_unique<RlweBackend>(params);
  return std::make_unique<SimulatorBackend>(params);
}

}  // namespace cdl::he
