// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdl/error.hpp"
#include "cdl/he/backend.hpp"
#include "cdl/nn/model.hpp"

namespace cdl::nn {

using Slots = std::vector<std::uint64_t>;

// Row-major (channel, row, column) tensor of ring elements. Each element
// carries a whole batch: one value per slot.
template <class Elem>
struct Tensor {
  Shape shape;
  std::vector<Elem> data;
};

// Arithmetic on plaintext slot vectors mod p.
class PlainRing {
 public:
  using Elem = Slots;
  explicit PlainRing(std::uint64_t p);

  std::uint64_t p() const { return p_; }
  // bias + sum_i w[i] * xs[i]
  Elem linear(std::span<const Elem* const> xs, std::span<const std::uint64_t> w, std::uint64_t bias) const;
  Elem sum(std::span<const Elem* const> xs) const;
  Elem poly(const Elem& x, std::span<const std::uint64_t> coeffs) const;

 private:
  std::uint64_t p_;
};

// The same operations on ciphertexts; only add, plaintext products and the
// ciphertext products inside activations are used.
class CipherRing {
 public:
  using Elem = he::Ciphertext;
  CipherRing(const he::Backend& be, const he::RelinKey& rk) : be_(be), rk_(rk) {}

  std::uint64_t p() const { return be_.p(); }
  Elem linear(std::span<const Elem* const> xs, std::span<const std::uint64_t> w, std::uint64_t bias) const;
  Elem sum(std::span<const Elem* const> xs) const { return be_.add_many(xs); }
  Elem poly(const Elem& x, std::span<const std::uint64_t> coeffs) const { return be_.eval_poly(x, coeffs, rk_); }

 private:
  const he::Backend& be_;
  const he::RelinKey& rk_;
};

namespace detail {
std::vector<std::uint64_t> residues(std::span<const std::int64_t> v, std::uint64_t p);
}  // namespace detail

template <class Ring>
Tensor<typename Ring::Elem> conv2d(const Ring& ring, const Tensor<typename Ring::Elem>& in, const LayerSpec& l) {
  using Elem = typename Ring::Elem;
  const Shape os = output_shape(l, in.shape);
  if (in.data.size() != in.shape.size()) throw ValidationError("conv2d: tensor data does not match its shape");
  const Conv2dGeom& c = l.conv;
  const std::size_t H = in.shape.dims[1], W = in.shape.dims[2], OH = os.dims[1], OW = os.dims[2];
  const std::vector<std::uint64_t> w = detail::residues(l.weights, ring.p());
  const std::vector<std::uint64_t> b = detail::residues(l.bias, ring.p());
  const std::size_t taps = c.in_ch * c.kh * c.kw;
  Tensor<Elem> out{os, {}};
  out.data.reserve(os.size());
  std::vector<const Elem*> window(taps);
  for (std::size_t o = 0; o < c.out_ch; ++o) {
    const std::span<const std::uint64_t> wo(w.data() + o * taps, taps);
    for (std::size_t i = 0; i < OH; ++i) {
      for (std::size_t j = 0; j < OW; ++j) {
        std::size_t t = 0;
        for (std::size_t ch = 0; ch < c.in_ch; ++ch) {
          for (std::size_t u = 0; u < c.kh; ++u) {
            for (std::size_t v = 0; v < c.kw; ++v) {
              window[t++] = &in.data[(ch * H + i * c.stride + u) * W + j * c.stride + v];
            }
          }
        }
        out.data.push_back(ring.linear(window, wo, b[o]));
      }
    }
  }
  return out;
}

// Window sum without the division; non-overlapping windows.
template <class Ring>
Tensor<typename Ring::Elem> avg_pool_scaled(const Ring& ring, const Tensor<typename Ring::Elem>& in,
                                            std::size_t window) {
  using Elem = typename Ring::Elem;
  LayerGeom g;
  g.kind = LayerKind::AvgPool;
  g.window = window;
  const Shape os = output_shape(g, in.shape);
  const std::size_t H = in.shape.dims[1], W = in.shape.dims[2], OH = os.dims[1], OW = os.dims[2];
  Tensor<Elem> out{os, {}};
  out.data.reserve(os.size());
  std::vector<const Elem*> cell(window * window);
  for (std::size_t ch = 0; ch < os.dims[0]; ++ch) {
    for (std::size_t i = 0; i < OH; ++i) {
      for (std::size_t j = 0; j < OW; ++j) {
        std::size_t t = 0;
        for (std::size_t u = 0; u < window; ++u) {
          for (std::size_t v = 0; v < window; ++v) cell[t++] = &in.data[(ch * H + i * window + u) * W + j * window + v];
        }
        out.data.push_back(ring.sum(cell));
      }
    }
  }
  return out;
}

template <class Ring>
Tensor<typename Ring::Elem> dense(const Ring& ring, const Tensor<typename Ring::Elem>& in, const LayerSpec& l) {
  using Elem = typename Ring::Elem;
  const Shape os = output_shape(l, in.shape);
  const std::vector<std::uint64_t> w = detail::residues(l.weights, ring.p());
  const std::vector<std::uint64_t> b = detail::residues(l.bias, ring.p());
  std::vector<const Elem*> xs;
  for (const Elem& e : in.data) xs.push_back(&e);
  Tensor<Elem> out{os, {}};
  out.data.reserve(l.dense.out);
  for (std::size_t o = 0; o < l.dense.out; ++o) {
    out.data.push_back(ring.linear(xs, std::span<const std::uint64_t>(w.data() + o * l.dense.in, l.dense.in), b[o]));
  }
  return out;
}

template <class Ring>
Tensor<typename Ring::Elem> poly_activation(const Ring& ring, const Tensor<typename Ring::Elem>& in,
                                            std::span<const std::int64_t> coeffs) {
  const std::vector<std::uint64_t> c = detail::residues(coeffs, ring.p());
  Tensor<typename Ring::Elem> out{in.shape, {}};
  out.data.reserve(in.data.size());
  for (const auto& e : in.data) out.data.push_back(ring.poly(e, c));
  return out;
}

struct LayerTiming {
  std::string layer;
  Shape output;
  double seconds = 0.0;
};

template <class Ring>
Tensor<typename Ring::Elem> apply_layer(const Ring& ring, const Tensor<typename Ring::Elem>& in, const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Conv2d: return conv2d(ring, in, l);
    case LayerKind::AvgPool: return avg_pool_scaled(ring, in, l.window);
    case LayerKind::Dense: return dense(ring, in, l);
    case LayerKind::PolyActivation: return poly_activation(ring, in, l.coeffs);
    case LayerKind::Flatten: return {output_shape(l, in.shape), in.data};
    case LayerKind::BatchNorm: break;
  }
  throw ValidationError("batch norm must be folded before inference");
}

// Runs every layer; errors are re-raised with the failing layer named.
template <class Ring>
Tensor<typename Ring::Elem> forward(const Ring& ring, const ModelSpec& m, Tensor<typename Ring::Elem> x,
                                    std::vector<LayerTiming>* timings = nullptr) {
  if (ring.p() != m.p) throw ValidationError("model was quantized for a different plaintext modulus");
  if (!(x.shape == m.input_shape)) {
    throw ValidationError("input shape " + x.shape.str() + " differs from model input " + m.input_shape.str());
  }
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    const std::string name = "layer " + std::to_string(i) + " (" + describe(l) + ")";
    const auto t0 = std::chrono::steady_clock::now();
    try {
      x = apply_layer(ring, x, l);
    } catch (const LevelExhausted& e) {
      throw LevelExhausted(name + ": " + e.what());
    } catch (const CapacityError& e) {
      throw CapacityError(name + ": " + e.what());
    } catch (const NoiseExhausted& e) {
      throw NoiseExhausted(name + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(name + ": " + e.what());
    }
    if (timings) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      timings->push_back({name, x.shape, s});
    }
  }
  return x;
}

// ------------------------------------------------------------ batches

// Packs instance b of the batch into slot b of every element. Inputs are
// already quantized residues.
Tensor<Slots> pack_batch(const Shape& shape, const std::vector<Slots>& instances);
// Per-instance logits (first `batch` slots).
std::vector<Slots> unpack_batch(const Tensor<Slots>& t, std::size_t batch);

Tensor<he::Ciphertext> encrypt_tensor(const he::Backend& be, const he::PublicKey& pk, const Tensor<Slots>& t);
Tensor<he::Ciphertext> encrypt_tensor(const he::Backend& be, const he::PublicKey& pk, const Tensor<Slots>& t,
                                      he::Prng& rng);
Tensor<Slots> decrypt_tensor(const he::Backend& be, const he::SecretKey& sk, const Tensor<he::Ciphertext>& t);

// Plaintext-mode inference: per-instance integer logits in [0, p).
std::vector<Slots> infer_plain(const ModelSpec& m, const std::vector<Slots>& instances,
                               std::vector<LayerTiming>* timings = nullptr);

// Encrypted inference: one ciphertext per logit, batch across the slots.
Tensor<he::Ciphertext> infer_encrypted(const he::Backend& be, const he::RelinKey& rk, const ModelSpec& m,
                                       Tensor<he::Ciphertext> input, std::vector<LayerTiming>* timings = nullptr);

// Argmax of the signed logits (values above p/2 are negative); ties go to
// the lowest index.
std::size_t predict(std::span<const std::uint64_t> logits, std::uint64_t p);

// Output of every layer of plaintext-mode inference on one instance, as real
// values (signed residue divided by the layer's output scale). Lines up with
// float_forward's trace of the folded model.
std::vector<std::vector<double>> dequantized_trace(const ModelSpec& m, const Slots& instance);

// ------------------------------------------------------------ depth

struct LayerDepth {
  std::string layer;
  int ct_depth = 0;       // ciphertext-ciphertext products on the critical path
  int plain_mults = 0;    // plaintext products applied to every element
};

struct DepthReport {
  int ct_depth = 0;
  int plain_mults = 0;
  std::vector<LayerDepth> layers;
  int minimal_L = 0;
  int recommended_L = 0;

  std::string to_json(int indent = 2) const;
};

inline constexpr int kDepthMargin = 2;

DepthReport depth_report(const ModelSpec& m);
DepthReport depth_report(const FloatModel& m);

// Encryption parameters sized for `m`: L from the depth report, and for the
// lattice backend a plaintext-product allowance covering every linear layer.
he::HEParams recommend_params(const ModelSpec& m, he::BackendKind kind, std::size_t slots);

}  // namespace cdl::nn
