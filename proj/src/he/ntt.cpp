// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/he/ntt.hpp"

#include <bit>

#include "cdl/error.hpp"

namespace cdl::he {

namespace {

std::size_t bit_reverse(std::size_t x, int bits) {
  std::size_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

}  // namespace

NttTables::NttTables(std::size_t n, const Modulus& q) : n_(n), q_(q) {
  if (n < 2 || !std::has_single_bit(n)) throw ValidationError("ring degree must be a power of two >= 2");
  const u64 qv = q.value();
  const u64 psi = primitive_root_of_unity(2 * n, q);
  const u64 psi_inv = q.inv(psi);
  const int logn = std::countr_zero(n);
  psi_rev_.resize(n);
  psi_inv_rev_.resize(n);
  u64 pw = 1;
  u64 pw_inv = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = bit_reverse(i, logn);
    psi_rev_[r] = ShoupConst(pw, qv);
    psi_inv_rev_[r] = ShoupConst(pw_inv, qv);
    pw = q.mul(pw, psi);
    pw_inv = q.mul(pw_inv, psi_inv);
  }
  n_inv_ = ShoupConst(q.inv(n % qv), qv);
}

// Harvey's lazy butterflies: values stay in [0, 4q) between stages.
void NttTables::forward(u64* a) const {
  const u64 q = q_.value();
  const u64 two_q = 2 * q;
  std::size_t t = n_;
  for (std::size_t m = 1; m < n_; m <<= 1) {
    t >>= 1;
    for (std::size_t i = 0; i < m; ++i) {
      const ShoupConst& w = psi_rev_[m + i];
      u64* x = a + 2 * i * t;
      u64* y = x + t;
      for (std::size_t j = 0; j < t; ++j) {
        u64 u = x[j];
        if (u >= two_q) u -= two_q;
        const u64 v = w.mul_lazy(y[j], q);
        x[j] = u + v;
        y[j] = u - v + two_q;
      }
    }
  }
  for (std::size_t i = 0; i < n_; ++i) {
    u64 v = a[i];
    if (v >= two_q) v -= two_q;
    if (v >= q) v -= q;
    a[i] = v;
  }
}

void NttTables::inverse(u64* a) const {
  const u64 q = q_.value();
  const u64 two_q = 2 * q;
  std::size_t t = 1;
  for (std::size_t m = n_ >> 1; m >= 1; m >>= 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const ShoupConst& w = psi_inv_rev_[m + i];
      u64* x = a + 2 * i * t;
      u64* y = x + t;
      for (std::size_t j = 0; j < t; ++j) {
        const u64 u = x[j];
        const u64 v = y[j];
        u64 s = u + v;
        if (s >= two_q) s -= two_q;
        x[j] = s;
        y[j] = w.mul_lazy(u - v + two_q, q);
      }
    }
    t <<= 1;
  }
  for (std::size_t i = 0; i < n_; ++i) a[i] = n_inv_.mul(a[i], q);
}

}  // namespace cdl::he
