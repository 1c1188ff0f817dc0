// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/he/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "cdl/error.hpp"

namespace cdl::he {

namespace {

constexpr std::size_t kSlots = 0;
constexpr std::size_t kMeta = 1;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t op) {
  return splitmix(a ^ splitmix(b + op));
}

// -log2(sum 2^-b_i): the budget left after adding terms with budgets b_i.
double log_sum_budget(std::span<const double> budgets) {
  double lo = std::numeric_limits<double>::infinity();
  for (double b : budgets) lo = std::min(lo, b);
  double acc = 0.0;
  for (double b : budgets) acc += std::exp2(lo - b);
  return lo - std::log2(acc);
}

}  // namespace

SimulatorBackend::SimulatorBackend(HEParams params) : Backend(std::move(params)), mod_(params_.p) {
  if (params_.backend != BackendKind::Simulator) throw ValidationError("params are not for the simulator");
}

std::uint64_t SimulatorBackend::tag_of(const KeyMaterial& key) const {
  std::uint64_t t;
  std::memcpy(&t, key.key_id.data(), sizeof(t));
  return t;
}

// Operations trust the tag inside the key material, not the key id, so a
// relabelled key still fails to decrypt.
std::uint64_t SimulatorBackend::stored_tag(const KeyMaterial& key) const {
  if (key.components.empty() || key.components[0].empty()) throw ValidationError("simulator key has no tag");
  return key.components[0][0];
}

KeySet SimulatorBackend::keygen(std::span<const std::uint8_t> seed) const {
  Bytes material(seed.begin(), seed.end());
  const std::string pj = params_to_json(params_, -1);
  material.insert(material.end(), pj.begin(), pj.end());
  const KeyId id = short_hash(material, "cdl-sim-keyid");
  Prng rng(seed, "cdl-sim-keygen");
  KeySet ks;
  ks.secret.backend = ks.pub.backend = ks.relin.backend = BackendKind::Simulator;
  ks.secret.kind = KeyKind::Secret;
  ks.pub.kind = KeyKind::Public;
  ks.relin.kind = KeyKind::Relin;
  ks.secret.key_id = ks.pub.key_id = ks.relin.key_id = id;
  // The secret carries a random word; public and relin keys carry only the tag.
  ks.secret.components = {{tag_of(ks.secret), rng.next_u64()}};
  ks.pub.components = {{tag_of(ks.pub)}};
  ks.relin.components = {{tag_of(ks.relin)}};
  return ks;
}

void SimulatorBackend::check(const Ciphertext& ct) const {
  if (ct.backend != BackendKind::Simulator) throw ValidationError("ciphertext is not a simulator ciphertext");
  if (ct.components.size() != 2 || ct.components[kSlots].size() != slot_count() || ct.components[kMeta].size() != 2) {
    throw ValidationError("simulator ciphertext has the wrong shape");
  }
  if (ct.level > static_cast<std::uint32_t>(params_.L)) throw ValidationError("ciphertext level exceeds L");
}

Ciphertext SimulatorBackend::encrypt(const PublicKey& pk, std::span<const std::uint64_t> slots, Prng& rng) const {
  check_key(pk, KeyKind::Public);
  check_plain(slots, true);
  Ciphertext ct;
  ct.backend = BackendKind::Simulator;
  ct.level = static_cast<std::uint32_t>(params_.L);
  ct.noise_budget = fresh_budget();
  Component values(slot_count(), 0);
  std::copy(slots.begin(), slots.end(), values.begin());
  ct.components = {std::move(values), {rng.next_u64(), stored_tag(pk)}};
  return ct;
}

Slots SimulatorBackend::decrypt(const SecretKey& sk, const Ciphertext& ct) const {
  check_key(sk, KeyKind::Secret);
  check(ct);
  if (ct.components[kMeta][1] != stored_tag(sk)) {
    throw NoiseExhausted("decryption failed: ciphertext was produced under a different key");
  }
  if (!(ct.noise_budget > 0.0)) {
    throw NoiseExhausted("noise budget exhausted (" + std::to_string(ct.noise_budget) + " bits)");
  }
  return ct.components[kSlots];
}

double SimulatorBackend::measure_noise_budget(const SecretKey& sk, const Ciphertext& ct) const {
  check_key(sk, KeyKind::Secret);
  check(ct);
  if (ct.components[kMeta][1] != stored_tag(sk)) return 0.0;
  return ct.noise_budget;
}

Ciphertext SimulatorBackend::add(const Ciphertext& a, const Ciphertext& b) const {
  const Ciphertext* both[2] = {&a, &b};
  return add_many(both);
}

Ciphertext SimulatorBackend::add_many(std::span<const Ciphertext* const> cts) const {
  if (cts.empty()) throw ValidationError("add_many needs at least one ciphertext");
  for (const Ciphertext* c : cts) check(*c);
  if (cts.size() == 1) return *cts[0];
  const std::size_t n = slot_count();
  const std::uint64_t p = params_.p;
  Ciphertext out;
  out.backend = BackendKind::Simulator;
  out.level = cts[0]->level;
  Component acc = cts[0]->components[kSlots];
  std::uint64_t nonce = cts[0]->components[kMeta][0];
  std::vector<double> budgets{cts[0]->noise_budget};
  for (std::size_t i = 1; i < cts.size(); ++i) {
    const Ciphertext& c = *cts[i];
    if (c.components[kMeta][1] != cts[0]->components[kMeta][1]) {
      throw ValidationError("cannot combine ciphertexts encrypted under different keys");
    }
    const std::uint64_t* v = c.components[kSlots].data();
    for (std::size_t s = 0; s < n; ++s) {
      const std::uint64_t x = acc[s] + v[s];
      acc[s] = x >= p ? x - p : x;
    }
    out.level = std::min(out.level, c.level);
    nonce = mix(nonce, c.components[kMeta][0], 1);
    budgets.push_back(c.noise_budget);
  }
  // Two equal budgets lose exactly the configured add cost.
  const double merged = log_sum_budget(budgets);
  const double lo = *std::min_element(budgets.begin(), budgets.end());
  out.noise_budget = lo - (lo - merged) * params_.noise.add;
  out.components = {std::move(acc), {nonce, cts[0]->components[kMeta][1]}};
  return out;
}

Ciphertext SimulatorBackend::add_plain(const Ciphertext& ct, std::span<const std::uint64_t> plain) const {
  check(ct);
  check_plain(plain, true);
  Ciphertext out = ct;
  Component& v = out.components[kSlots];
  for (std::size_t s = 0; s < plain.size(); ++s) v[s] = mod_.add(v[s], plain[s]);
  out.components[kMeta][0] = mix(ct.components[kMeta][0], 0, 2);
  out.noise_budget = ct.noise_budget - params_.noise.add_plain;
  return out;
}

Ciphertext SimulatorBackend::add_scalar(const Ciphertext& ct, std::uint64_t s) const {
  check(ct);
  if (s >= params_.p) throw ValidationError("scalar not reduced mod p");
  Ciphertext out = ct;
  for (std::uint64_t& v : out.components[kSlots]) v = mod_.add(v, s);
  out.components[kMeta][0] = mix(ct.components[kMeta][0], s, 3);
  out.noise_budget = ct.noise_budget - params_.noise.add_plain;
  return out;
}

Ciphertext SimulatorBackend::mul(const Ciphertext& a, const Ciphertext& b, const RelinKey& rk) const {
  check(a);
  check(b);
  check_key(rk, KeyKind::Relin);
  if (a.level == 0 || b.level == 0) throw LevelExhausted("ciphertext multiplication at level 0");
  if (a.components[kMeta][1] != b.components[kMeta][1] || a.components[kMeta][1] != stored_tag(rk)) {
    throw ValidationError("operands and relinearization key belong to different key sets");
  }
  Ciphertext out;
  out.backend = BackendKind::Simulator;
  out.level = std::min(a.level, b.level) - 1;
  out.noise_budget = std::min(a.noise_budget, b.noise_budget) - params_.noise.mul;
  Component v(slot_count());
  const Component& x = a.components[kSlots];
  const Component& y = b.components[kSlots];
  for (std::size_t s = 0; s < v.size(); ++s) v[s] = mod_.mul(x[s], y[s]);
  out.components = {std::move(v), {mix(a.components[kMeta][0], b.components[kMeta][0], 4), a.components[kMeta][1]}};
  return out;
}

Ciphertext SimulatorBackend::mul_plain(const Ciphertext& ct, std::span<const std::uint64_t> plain) const {
  check(ct);
  check_plain(plain, true);
  Ciphertext out = ct;
  Component& v = out.components[kSlots];
  for (std::size_t s = 0; s < v.size(); ++s) v[s] = s < plain.size() ? mod_.mul(v[s], plain[s]) : 0;
  out.components[kMeta][0] = mix(ct.components[kMeta][0], 0, 5);
  out.noise_budget = ct.noise_budget - params_.noise.mul_plain;
  return out;
}

Ciphertext SimulatorBackend::mul_scalar(const Ciphertext& ct, std::uint64_t s) const {
  check(ct);
  if (s >= params_.p) throw ValidationError("scalar not reduced mod p");
  Ciphertext out = ct;
  const ShoupConst w(s, params_.p);
  for (std::uint64_t& v : out.components[kSlots]) v = w.mul(v, params_.p);
  out.components[kMeta][0] = mix(ct.components[kMeta][0], s, 6);
  out.noise_budget = ct.noise_budget - params_.noise.mul_plain;
  return out;
}

Ciphertext SimulatorBackend::linear_combination(std::span<const Ciphertext* const> cts,
                                                std::span<const std::uint64_t> scalars) const {
  if (cts.empty() || cts.size() != scalars.size()) {
    throw ValidationError("linear_combination needs matching, non-empty ciphertext and scalar lists");
  }
  for (const Ciphertext* c : cts) check(*c);
  for (std::uint64_t s : scalars) {
    if (s >= params_.p) throw ValidationError("scalar not reduced mod p");
  }
  const std::size_t n = slot_count();
  const std::uint64_t p = params_.p;
  // Accumulate unreduced products in 128 bits; flush before they can overflow.
  const u128 max_prod = static_cast<u128>(p - 1) * (p - 1);
  const u128 room = ~u128{0} - static_cast<u128>(p);
  const std::size_t flush_every = static_cast<std::size_t>(std::min<u128>(room / (max_prod + 1), 1u << 20));
  std::vector<u128> acc(n, 0);
  std::uint64_t nonce = cts[0]->components[kMeta][0];
  std::uint32_t level = cts[0]->level;
  std::vector<double> budgets;
  budgets.reserve(cts.size());
  std::size_t pending = 0;
  for (std::size_t i = 0; i < cts.size(); ++i) {
    const Ciphertext& c = *cts[i];
    if (c.components[kMeta][1] != cts[0]->components[kMeta][1]) {
      throw ValidationError("cannot combine ciphertexts encrypted under different keys");
    }
    const std::uint64_t w = scalars[i];
    const std::uint64_t* v = c.components[kSlots].data();
    if (w != 0) {
      if (pending == flush_every) {
        for (std::size_t s = 0; s < n; ++s) acc[s] = mod_.reduce128(acc[s]);
        pending = 0;
      }
      for (std::size_t s = 0; s < n; ++s) acc[s] += static_cast<u128>(w) * v[s];
      ++pending;
    }
    nonce = mix(nonce, c.components[kMeta][0], 7 + w);
    level = std::min(level, c.level);
    budgets.push_back(c.noise_budget - params_.noise.mul_plain);
  }
  Component out_v(n);
  for (std::size_t s = 0; s < n; ++s) out_v[s] = mod_.reduce128(acc[s]);
  Ciphertext out;
  out.backend = BackendKind::Simulator;
  out.level = level;
  if (budgets.size() == 1) {
    out.noise_budget = budgets[0];
  } else {
    const double merged = log_sum_budget(budgets);
    const double lo = *std::min_element(budgets.begin(), budgets.end());
    out.noise_budget = lo - (lo - merged) * params_.noise.add;
  }
  out.components = {std::move(out_v), {nonce, cts[0]->components[kMeta][1]}};
  return out;
}

Ciphertext SimulatorBackend::rotate(const Ciphertext& ct, int steps) const {
  check(ct);
  const std::size_t n = slot_count();
  const long long m = static_cast<long long>(n);
  const std::size_t shift = static_cast<std::size_t>(((steps % m) + m) % m);
  Ciphertext out = ct;
  std::rotate(out.components[kSlots].begin(), out.components[kSlots].begin() + static_cast<std::ptrdiff_t>(shift),
              out.components[kSlots].end());
  out.components[kMeta][0] = mix(ct.components[kMeta][0], shift, 9);
  out.noise_budget = ct.noise_budget - params_.noise.rotate;
  return out;
}

}  // namespace cdl::he
