// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/nn/engine.hpp"

#include <json.hpp>

#include <algorithm>

#include "cdl/he/modarith.hpp"
#include "cdl/quantize/quantize.hpp"

namespace cdl::nn {

using he::u128;

namespace detail {

std::vector<std::uint64_t> residues(std::span<const std::int64_t> v, std::uint64_t p) {
  std::vector<std::uint64_t> out;
  out.reserve(v.size());
  for (std::int64_t x : v) out.push_back(quant::to_residue(x, p));
  return out;
}

}  // namespace detail

PlainRing::PlainRing(std::uint64_t p) : p_(p) {
  if (p < 3) throw ValidationError("plaintext modulus must be at least 3");
}

PlainRing::Elem PlainRing::linear(std::span<const Elem* const> xs, std::span<const std::uint64_t> w,
                                  std::uint64_t bias) const {
  if (xs.empty() || xs.size() != w.size()) throw ValidationError("linear needs matching inputs and weights");
  const he::Modulus mod(p_);
  const std::size_t n = xs[0]->size();
  const u128 max_prod = static_cast<u128>(p_ - 1) * (p_ - 1);
  const std::size_t flush_every =
      static_cast<std::size_t>(std::min<u128>((~u128{0} - p_) / (max_prod + 1), 1u << 20));
  std::vector<u128> acc(n, bias);
  std::size_t pending = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (w[i] == 0) continue;
    if (xs[i]->size() != n) throw ValidationError("slot vectors differ in length");
    if (pending == flush_every) {
      for (auto& a : acc) a = mod.reduce128(a);
      pending = 0;
    }
    const std::uint64_t* v = xs[i]->data();
    const u128 wi = w[i];
    for (std::size_t s = 0; s < n; ++s) acc[s] += wi * v[s];
    ++pending;
  }
  Elem out(n);
  for (std::size_t s = 0; s < n; ++s) out[s] = mod.reduce128(acc[s]);
  return out;
}

PlainRing::Elem PlainRing::sum(std::span<const Elem* const> xs) const {
  if (xs.empty()) throw ValidationError("sum needs at least one input");
  const std::vector<std::uint64_t> ones(xs.size(), 1);
  return linear(xs, ones, 0);
}

PlainRing::Elem PlainRing::poly(const Elem& x, std::span<const std::uint64_t> coeffs) const {
  const he::Modulus mod(p_);
  Elem out(x.size(), 0);
  for (std::size_t s = 0; s < x.size(); ++s) {
    std::uint64_t acc = 0;
    for (std::size_t k = coeffs.size(); k-- > 0;) acc = mod.add(mod.mul(acc, x[s]), coeffs[k]);
    out[s] = acc;
  }
  return out;
}

CipherRing::Elem CipherRing::linear(std::span<const Elem* const> xs, std::span<const std::uint64_t> w,
                                    std::uint64_t bias) const {
  Elem acc = be_.linear_combination(xs, w);
  return bias == 0 ? acc : be_.add_scalar(acc, bias);
}

Tensor<Slots> pack_batch(const Shape& shape, const std::vector<Slots>& instances) {
  if (instances.empty()) throw ValidationError("empty batch");
  Tensor<Slots> t{shape, std::vector<Slots>(shape.size(), Slots(instances.size()))};
  for (std::size_t b = 0; b < instances.size(); ++b) {
    if (instances[b].size() != shape.size()) {
      throw ValidationError("instance " + std::to_string(b) + " has " + std::to_string(instances[b].size()) +
                            " values, expected " + std::to_string(shape.size()));
    }
    for (std::size_t e = 0; e < shape.size(); ++e) t.data[e][b] = instances[b][e];
  }
  return t;
}

std::vector<Slots> unpack_batch(const Tensor<Slots>& t, std::size_t batch) {
  std::vector<Slots> out(batch, Slots(t.data.size()));
  for (std::size_t e = 0; e < t.data.size(); ++e) {
    if (t.data[e].size() < batch) throw ValidationError("tensor holds fewer slots than the batch");
    for (std::size_t b = 0; b < batch; ++b) out[b][e] = t.data[e][b];
  }
  return out;
}

Tensor<he::Ciphertext> encrypt_tensor(const he::Backend& be, const he::PublicKey& pk, const Tensor<Slots>& t) {
  he::Prng rng = he::Prng::from_os_entropy();
  return encrypt_tensor(be, pk, t, rng);
}

Tensor<he::Ciphertext> encrypt_tensor(const he::Backend& be, const he::PublicKey& pk, const Tensor<Slots>& t,
                                      he::Prng& rng) {
  Tensor<he::Ciphertext> out{t.shape, {}};
  out.data.reserve(t.data.size());
  for (const Slots& s : t.data) out.data.push_back(be.encrypt(pk, s, rng));
  return out;
}

Tensor<Slots> decrypt_tensor(const he::Backend& be, const he::SecretKey& sk, const Tensor<he::Ciphertext>& t) {
  Tensor<Slots> out{t.shape, {}};
  out.data.reserve(t.data.size());
  for (const he::Ciphertext& c : t.data) out.data.push_back(be.decrypt(sk, c));
  return out;
}

std::vector<Slots> infer_plain(const ModelSpec& m, const std::vector<Slots>& instances,
                               std::vector<LayerTiming>* timings) {
  const PlainRing ring(m.p);
  const Tensor<Slots> out = forward(ring, m, pack_batch(m.input_shape, instances), timings);
  return unpack_batch(out, instances.size());
}

std::vector<std::vector<double>> dequantized_trace(const ModelSpec& m, const Slots& instance) {
  const PlainRing ring(m.p);
  Tensor<Slots> x = pack_batch(m.input_shape, {instance});
  std::vector<std::vector<double>> out;
  for (const LayerSpec& l : m.layers) {
    x = apply_layer(ring, x, l);
    std::vector<double> real;
    real.reserve(x.data.size());
    for (const Slots& e : x.data) real.push_back(static_cast<double>(quant::to_signed(e[0], m.p)) / l.scale_out);
    out.push_back(std::move(real));
  }
  return out;
}

Tensor<he::Ciphertext> infer_encrypted(const he::Backend& be, const he::RelinKey& rk, const ModelSpec& m,
                                       Tensor<he::Ciphertext> input, std::vector<LayerTiming>* timings) {
  if (input.data.empty()) throw ValidationError("empty input tensor");
  const DepthReport d = depth_report(m);
  for (const he::Ciphertext& c : input.data) {
    if (static_cast<int>(c.level) < d.minimal_L) {
      throw LevelExhausted("model needs " + std::to_string(d.minimal_L) + " levels; input ciphertexts have " +
                           std::to_string(c.level));
    }
  }
  const CipherRing ring(be, rk);
  return forward(ring, m, std::move(input), timings);
}

std::size_t predict(std::span<const std::uint64_t> logits, std::uint64_t p) {
  if (logits.empty()) throw ValidationError("no logits");
  std::size_t best = 0;
  std::int64_t best_v = quant::to_signed(logits[0], p);
  for (std::size_t i = 1; i < logits.size(); ++i) {
    const std::int64_t v = quant::to_signed(logits[i], p);
    if (v > best_v) {
      best = i;
      best_v = v;
    }
  }
  return best;
}

// ------------------------------------------------------------ depth

namespace {

template <class Layer>
DepthReport depth_of(const std::vector<Layer>& layers, const auto& degree_of) {
  DepthReport r;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    LayerDepth d;
    d.layer = std::to_string(i) + ":" + describe(l);
    if (l.kind == LayerKind::PolyActivation) d.ct_depth = he::poly_depth(degree_of(l));
    if (l.kind == LayerKind::Conv2d || l.kind == LayerKind::Dense) d.plain_mults = 1;
    r.ct_depth += d.ct_depth;
    r.plain_mults += d.plain_mults;
    r.layers.push_back(d);
  }
  r.minimal_L = r.ct_depth;
  r.recommended_L = r.ct_depth + kDepthMargin;
  return r;
}

}  // namespace

DepthReport depth_report(const ModelSpec& m) {
  return depth_of(m.layers, [](const LayerSpec& l) { return static_cast<int>(l.coeffs.size()) - 1; });
}

DepthReport depth_report(const FloatModel& m) {
  return depth_of(m.layers, [](const FloatLayer& l) { return static_cast<int>(l.coeffs.size()) - 1; });
}

std::string DepthReport::to_json(int indent) const {
  nlohmann::json j;
  j["ct_depth"] = ct_depth;
  j["plain_mults"] = plain_mults;
  j["minimal_L"] = minimal_L;
  j["recommended_L"] = recommended_L;
  j["layers"] = nlohmann::json::array();
  for (const LayerDepth& d : layers) {
    j["layers"].push_back({{"layer", d.layer}, {"ct_depth", d.ct_depth}, {"plain_mults", d.plain_mults}});
  }
  return j.dump(indent);
}

he::HEParams recommend_params(const ModelSpec& m, he::BackendKind kind, std::size_t slots) {
  const DepthReport d = depth_report(m);
  const int L = std::max(1, d.recommended_L);
  if (kind == he::BackendKind::Simulator) return he::HEParams::simulator(m.p, L, slots);
  he::HEParams p = he::HEParams::rlwe(m.p, L, slots);
  // Pooling sums and the additions inside activations cost a few bits each.
  p.plain_mults = d.plain_mults + 1;
  return p;
}

}  // namespace cdl::nn
