// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/he/modarith.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "cdl/error.hpp"

namespace cdl::he {

Modulus::Modulus(u64 q) : q_(q), bits_(static_cast<int>(std::bit_width(q))) {
  if (q < 2 || q >= (u64{1} << 62)) throw ValidationError("modulus must lie in [2, 2^62)");
  // floor(2^128 / q) as two words, via long division on 2^128 - 1.
  const u128 hi_num = ~u128{0};
  u128 ratio = hi_num / q;
  if ((hi_num % q) + 1 == q) ratio += 1;
  ratio_[0] = static_cast<u64>(ratio);
  ratio_[1] = static_cast<u64>(ratio >> 64);
}

u64 Modulus::pow(u64 base, u64 exp) const {
  u64 result = 1 % q_;
  base = reduce(base);
  while (exp != 0) {
    if (exp & 1) result = mul(result, base);
    base = mul(base, base);
    exp >>= 1;
  }
  return result;
}

u64 Modulus::inv(u64 a) const {
  // Extended Euclid on signed 128-bit values.
  i128 t = 0, new_t = 1;
  i128 r = q_, new_r = reduce(a);
  while (new_r != 0) {
    const i128 quot = r / new_r;
    i128 tmp = t - quot * new_t;
    t = new_t;
    new_t = tmp;
    tmp = r - quot * new_r;
    r = new_r;
    new_r = tmp;
  }
  if (r != 1) throw ValidationError(std::to_string(a) + " is not invertible mod " + std::to_string(q_));
  if (t < 0) t += q_;
  return static_cast<u64>(t);
}

namespace {

u64 mulmod_u128(u64 a, u64 b, u64 m) { return static_cast<u64>(static_cast<u128>(a) * b % m); }

u64 powmod_u128(u64 b, u64 e, u64 m) {
  u64 r = 1 % m;
  b %= m;
  while (e) {
    if (e & 1) r = mulmod_u128(r, b, m);
    b = mulmod_u128(b, b, m);
    e >>= 1;
  }
  return r;
}

}  // namespace

bool is_prime(u64 n) {
  if (n < 2) return false;
  for (u64 sp : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % sp == 0) return n == sp;
  }
  u64 d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  // These bases are a deterministic witness set for all 64-bit n.
  for (u64 a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    u64 x = powmod_u128(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = mulmod_u128(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

std::vector<u64> find_primes(int bits, u64 step, std::size_t count, const std::vector<u64>& exclude) {
  if (bits < 2 || bits > 61) throw ValidationError("prime size must lie in [2, 61] bits");
  std::vector<u64> out;
  const u64 top = u64{1} << bits;
  if (step >= top) throw ValidationError("no primes of the requested size for this ring degree");
  u64 cand = (top - 1) / step * step + 1;
  if (cand >= top) cand -= step;
  while (out.size() < count) {
    if (cand <= step) throw ValidationError("ran out of NTT-friendly primes");
    if (is_prime(cand) && std::find(exclude.begin(), exclude.end(), cand) == exclude.end()) out.push_back(cand);
    cand -= step;
  }
  return out;
}

u64 next_prime_congruent_one(u64 lower, u64 step) {
  u64 cand = lower <= 1 ? 1 : (lower - 1 + step - 1) / step * step + 1;
  if (cand < lower) cand += step;
  while (!is_prime(cand)) cand += step;
  return cand;
}

u64 primitive_root_of_unity(u64 order, const Modulus& q) {
  const u64 qv = q.value();
  if (order == 0 || (qv - 1) % order != 0) {
    throw ValidationError("modulus " + std::to_string(qv) + " has no root of unity of order " + std::to_string(order));
  }
  // order is a power of two in every caller, so checking x^(order/2) != 1 suffices.
  for (u64 g = 2; g < qv; ++g) {
    const u64 cand = q.pow(g, (qv - 1) / order);
    if (order == 1) return cand;
    if (q.pow(cand, order / 2) == qv - 1) return cand;
  }
  throw ValidationError("no primitive root found");
}

}  // namespace cdl::he
