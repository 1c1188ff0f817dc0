// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/he/circuit.hpp"

#include <algorithm>

#include "cdl/error.hpp"
#include "cdl/he/modarith.hpp"

namespace cdl::he {

std::vector<int> Circuit::wire_depths() const {
  std::vector<int> d(inputs, 0);
  d.reserve(wire_count());
  for (const Gate& g : gates) {
    switch (g.op) {
      case GateOp::Add:
        d.push_back(std::max(d.at(g.a), d.at(g.b)));
        break;
      case GateOp::Mul:
        d.push_back(std::max(d.at(g.a), d.at(g.b)) + 1);
        break;
      default:
        d.push_back(d.at(g.a));
    }
  }
  return d;
}

int Circuit::depth() const {
  const std::vector<int> d = wire_depths();
  return d.empty() ? 0 : *std::max_element(d.begin(), d.end());
}

Circuit random_circuit(Prng& rng, const CircuitLimits& limits, std::size_t slots, std::uint64_t p) {
  if (limits.max_inputs == 0 || limits.max_gates == 0) throw ValidationError("circuit limits must be positive");
  Circuit c;
  c.inputs = 1 + rng.uniform(limits.max_inputs);
  const std::size_t gates = 1 + rng.uniform(limits.max_gates);
  std::vector<int> depth(c.inputs, 0);
  int plain_products = 0;
  const auto pick = [&]() { return static_cast<std::size_t>(rng.uniform(depth.size())); };
  const auto new_plain = [&]() {
    Slots v(slots);
    for (auto& x : v) x = rng.uniform(p);
    c.plains.push_back(std::move(v));
    return c.plains.size() - 1;
  };
  // Lean towards the deepest wire so circuits actually reach max_depth.
  const auto pick_deep = [&]() {
    if (rng.uniform(2) == 0) return pick();
    return static_cast<std::size_t>(std::max_element(depth.begin(), depth.end()) - depth.begin());
  };
  for (std::size_t i = 0; i < gates; ++i) {
    Gate g;
    const std::uint64_t roll = rng.uniform(100);
    if (roll < 35) {
      g.op = GateOp::Mul;
      g.a = pick_deep();
      g.b = rng.uniform(3) == 0 ? g.a : pick();
      if (std::max(depth[g.a], depth[g.b]) + 1 > limits.max_depth) g.op = GateOp::Add;
    } else if (roll < 60) {
      g.op = GateOp::Add;
      g.a = pick();
      g.b = pick();
    } else if (roll < 72) {
      g.op = GateOp::AddPlain;
      g.a = pick();
      g.plain = new_plain();
    } else if (roll < 82) {
      g.op = GateOp::AddScalar;
      g.a = pick();
      g.scalar = rng.uniform(p);
    } else if (roll < 91) {
      g.op = GateOp::MulPlain;
      g.a = pick();
    } else {
      g.op = GateOp::MulScalar;
      g.a = pick();
      g.scalar = rng.uniform(p);
    }
    if (g.op == GateOp::MulPlain || g.op == GateOp::MulScalar) {
      if (plain_products >= limits.max_plain_products) {
        g.op = GateOp::AddScalar;
        g.scalar = rng.uniform(p);
      } else {
        ++plain_products;
        if (g.op == GateOp::MulPlain) g.plain = new_plain();
      }
    }
    const int da = depth[g.a];
    const int db = (g.op == GateOp::Add || g.op == GateOp::Mul) ? depth[g.b] : 0;
    depth.push_back(g.op == GateOp::Mul ? std::max(da, db) + 1 : std::max(da, db));
    c.gates.push_back(g);
  }
  return c;
}

Circuit mul_chain(std::size_t muls) {
  Circuit c;
  c.inputs = 1;
  for (std::size_t i = 0; i < muls; ++i) c.gates.push_back(Gate{GateOp::Mul, i, i, 0, 0});
  return c;
}

std::vector<Slots> eval_plain(const Circuit& c, const std::vector<Slots>& inputs, std::uint64_t p) {
  if (inputs.size() != c.inputs) throw ValidationError("wrong number of circuit inputs");
  const Modulus mod(p);
  std::vector<Slots> w = inputs;
  w.reserve(c.wire_count());
  for (const Gate& g : c.gates) {
    const Slots& a = w.at(g.a);
    Slots out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      switch (g.op) {
        case GateOp::Add: out[i] = mod.add(a[i], w.at(g.b)[i]); break;
        case GateOp::Mul: out[i] = mod.mul(a[i], w.at(g.b)[i]); break;
        case GateOp::AddPlain: out[i] = mod.add(a[i], c.plains.at(g.plain)[i]); break;
        case GateOp::MulPlain: out[i] = mod.mul(a[i], c.plains.at(g.plain)[i]); break;
        case GateOp::AddScalar: out[i] = mod.add(a[i], g.scalar); break;
        case GateOp::MulScalar: out[i] = mod.mul(a[i], g.scalar); break;
      }
    }
    w.push_back(std::move(out));
  }
  return w;
}

std::vector<Ciphertext> eval_encrypted(const Circuit& c, const Backend& be, const std::vector<Ciphertext>& inputs,
                                       const RelinKey& rk) {
  if (inputs.size() != c.inputs) throw ValidationError("wrong number of circuit inputs");
  std::vector<Ciphertext> w = inputs;
  w.reserve(c.wire_count());
  for (const Gate& g : c.gates) {
    const Ciphertext& a = w.at(g.a);
    switch (g.op) {
      case GateOp::Add: w.push_back(be.add(a, w.at(g.b))); break;
      case GateOp::Mul: w.push_back(be.mul(a, w.at(g.b), rk)); break;
      case GateOp::AddPlain: w.push_back(be.add_plain(a, c.plains.at(g.plain))); break;
      case GateOp::MulPlain: w.push_back(be.mul_plain(a, c.plains.at(g.plain))); break;
      case GateOp::AddScalar: w.push_back(be.add_scalar(a, g.scalar)); break;
      case GateOp::MulScalar: w.push_back(be.mul_scalar(a, g.scalar)); break;
    }
  }
  return w;
}

}  // namespace cdl::he
