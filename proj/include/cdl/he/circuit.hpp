// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cdl/he/backend.hpp"

namespace cdl::he {

enum class GateOp : std::uint8_t { Add, Mul, AddPlain, MulPlain, AddScalar, MulScalar };

// Wires 0..inputs-1 are the circuit inputs; gate g writes wire inputs + g.
struct Gate {
  GateOp op = GateOp::Add;
  std::size_t a = 0;
  std::size_t b = 0;          // second wire for Add / Mul
  std::uint64_t scalar = 0;   // AddScalar / MulScalar
  std::size_t plain = 0;      // index into Circuit::plains for AddPlain / MulPlain
};

struct Circuit {
  std::size_t inputs = 1;
  std::vector<Slots> plains;
  std::vector<Gate> gates;

  std::size_t wire_count() const { return inputs + gates.size(); }
  // Multiplicative depth of every wire.
  std::vector<int> wire_depths() const;
  int depth() const;
};

struct CircuitLimits {
  int max_depth = 6;
  std::size_t max_gates = 30;
  std::size_t max_inputs = 3;
  // Plaintext and scalar products together; each one costs noise on the
  // lattice backend, which sizes its modulus for a fixed allowance.
  int max_plain_products = 3;
};

Circuit random_circuit(Prng& rng, const CircuitLimits& limits, std::size_t slots, std::uint64_t p);

// A chain of `muls` squarings of input 0, used to probe level exhaustion.
Circuit mul_chain(std::size_t muls);

// Values of every wire, computed in the clear mod p.
std::vector<Slots> eval_plain(const Circuit& c, const std::vector<Slots>& inputs, std::uint64_t p);

// Ciphertexts of every wire.
std::vector<Ciphertext> eval_encrypted(const Circuit& c, const Backend& be, const std::vector<Ciphertext>& inputs,
                                       const RelinKey& rk);

}  // namespace cdl::he
