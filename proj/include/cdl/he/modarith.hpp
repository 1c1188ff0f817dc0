// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace cdl::he {

using u64 = std::uint64_t;
__extension__ using u128 = unsigned __int128;
__extension__ using i128 = __int128;

// A modulus below 2^62 with a two-word Barrett constant floor(2^128 / q).
class Modulus {
 public:
  Modulus() = default;
  explicit Modulus(u64 q);

  u64 value() const { return q_; }
  int bits() const { return bits_; }

  u64 reduce(u64 a) const { return a >= q_ ? a % q_ : a; }

  u64 reduce128(u128 z) const {
    const u64 z0 = static_cast<u64>(z);
    const u64 z1 = static_cast<u64>(z >> 64);
    // Multiply z by the 128-bit ratio and keep the top word.
    u128 t = static_cast<u128>(z0) * ratio_[0];
    u64 carry = static_cast<u64>(t >> 64);
    t = static_cast<u128>(z0) * ratio_[1];
    u64 tmp1 = static_cast<u64>(t) + carry;
    u64 tmp3 = static_cast<u64>(t >> 64) + (tmp1 < carry ? 1 : 0);
    t = static_cast<u128>(z1) * ratio_[0];
    const u64 lo = static_cast<u64>(t);
    tmp1 = lo + tmp1;
    carry = static_cast<u64>(t >> 64) + (tmp1 < lo ? 1 : 0);
    const u64 qhat = z1 * ratio_[1] + tmp3 + carry;
    u64 r = z0 - qhat * q_;
    return r >= q_ ? r - q_ : r;
  }

  u64 mul(u64 a, u64 b) const { return reduce128(static_cast<u128>(a) * b); }
  u64 add(u64 a, u64 b) const {
    const u64 s = a + b;
    return s >= q_ ? s - q_ : s;
  }
  u64 sub(u64 a, u64 b) const { return a >= b ? a - b : a + q_ - b; }
  u64 neg(u64 a) const { return a == 0 ? 0 : q_ - a; }

  u64 pow(u64 base, u64 exp) const;
  u64 inv(u64 a) const;  // throws for non-invertible a

  // Centered representative in (-q/2, q/2].
  std::int64_t centered(u64 a) const {
    return a > q_ / 2 ? -static_cast<std::int64_t>(q_ - a) : static_cast<std::int64_t>(a);
  }
  u64 from_signed(std::int64_t v) const {
    if (v >= 0) return reduce(static_cast<u64>(v));
    const u64 m = static_cast<u64>(-(v + 1)) + 1;
    return neg(reduce(m));
  }

 private:
  u64 q_ = 0;
  int bits_ = 0;
  u64 ratio_[2] = {0, 0};
};

// Multiplication by a fixed operand w with precomputed floor(w * 2^64 / q).
struct ShoupConst {
  u64 w = 0;
  u64 w_shoup = 0;

  ShoupConst() = default;
  ShoupConst(u64 w_, u64 q) : w(w_), w_shoup(static_cast<u64>((static_cast<u128>(w_) << 64) / q)) {}

  // Result in [0, 2q).
  u64 mul_lazy(u64 x, u64 q) const {
    const u64 hi = static_cast<u64>((static_cast<u128>(x) * w_shoup) >> 64);
    return x * w - hi * q;
  }
  u64 mul(u64 x, u64 q) const {
    const u64 r = mul_lazy(x, q);
    return r >= q ? r - q : r;
  }
};

bool is_prime(u64 n);

// Largest primes below 2^bits that are congruent to 1 modulo `step`,
// skipping anything listed in `exclude`. Returned in descending order.
std::vector<u64> find_primes(int bits, u64 step, std::size_t count, const std::vector<u64>& exclude = {});

// Smallest prime >= lower with prime = 1 mod step.
u64 next_prime_congruent_one(u64 lower, u64 step);

// A primitive root of unity of order `order` modulo prime q (order | q-1).
u64 primitive_root_of_unity(u64 order, const Modulus& q);

}  // namespace cdl::he
