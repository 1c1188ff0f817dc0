// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "cdl/he/modarith.hpp"

namespace cdl::he {

// Negacyclic NTT over Z_q[x]/(x^n + 1) for a prime q = 1 mod 2n. Forward
// output is in bit-reversed order; inverse takes that order back.
class NttTables {
 public:
  NttTables(std::size_t n, const Modulus& q);

  std::size_t n() const { return n_; }
  const Modulus& modulus() const { return q_; }

  void forward(u64* a) const;
  void inverse(u64* a) const;

 private:
  std::size_t n_;
  Modulus q_;
  std::vector<ShoupConst> psi_rev_;      // psi^bitrev(i)
  std::vector<ShoupConst> psi_inv_rev_;  // psi^-(bitrev(i))
  ShoupConst n_inv_;
};

}  // namespace cdl::he
