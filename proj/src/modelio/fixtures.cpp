// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/modelio/fixtures.hpp"

#include <algorithm>
#include <cmath>

#include "cdl/approx/approximate.hpp"
#include "cdl/he/params.hpp"
#include "cdl/error.hpp"
#include "cdl/quantize/quantize.hpp"

namespace cdl::modelio {

using nn::FloatLayer;
using nn::LayerKind;

namespace {

he::Prng seeded(std::uint64_t seed, const char* domain) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  return he::Prng(b, domain);
}

double unit(he::Prng& r) { return static_cast<double>(r.next_u64() >> 11) * 0x1.0p-53; }

double sym(he::Prng& r, double a) { return static_cast<float>((2.0 * unit(r) - 1.0) * a); }

FloatLayer conv(he::Prng& r, std::size_t out, std::size_t in, std::size_t k) {
  FloatLayer l;
  l.kind = LayerKind::Conv2d;
  l.conv = {out, in, k, k, 1};
  const double a = 1.0 / std::sqrt(static_cast<double>(in * k * k));
  for (std::size_t i = 0; i < l.weight_count(); ++i) l.weights.push_back(sym(r, a));
  for (std::size_t i = 0; i < out; ++i) l.bias.push_back(sym(r, 0.1));
  return l;
}

FloatLayer dense(he::Prng& r, std::size_t out, std::size_t in) {
  FloatLayer l;
  l.kind = LayerKind::Dense;
  l.dense = {out, in};
  const double a = 1.0 / std::sqrt(static_cast<double>(in));
  for (std::size_t i = 0; i < l.weight_count(); ++i) l.weights.push_back(sym(r, a));
  for (std::size_t i = 0; i < out; ++i) l.bias.push_back(sym(r, 0.1));
  return l;
}

// Statistics loosely matched to raw-pixel inputs: the first norm brings
// the activations back to unit range.
FloatLayer batch_norm(he::Prng& r, std::size_t channels, double typical_std) {
  FloatLayer l;
  l.kind = LayerKind::BatchNorm;
  l.channels = channels;
  l.bn.eps = static_cast<float>(1e-3);
  for (std::size_t i = 0; i < channels; ++i) {
    l.bn.gamma.push_back(static_cast<float>(0.75 + 0.5 * unit(r)));
    l.bn.beta.push_back(sym(r, 0.1));
    l.bn.mean.push_back(sym(r, 0.1 * typical_std));
    const double sd = typical_std * (0.75 + 0.5 * unit(r));
    l.bn.var.push_back(static_cast<float>(sd * sd));
  }
  return l;
}

FloatLayer pool(std::size_t w) {
  FloatLayer l;
  l.kind = LayerKind::AvgPool;
  l.window = w;
  return l;
}

FloatLayer activation() {
  FloatLayer l;
  l.kind = LayerKind::PolyActivation;
  l.coeffs = default_activation_coeffs();
  return l;
}

ModelFile wrap(nn::FloatModel m) {
  ModelFile f;
  m.activation_report = "relu/derivative/chebyshev(l=8)/degree-3";
  f.model = std::move(m);
  f.p = he::wide_plaintext_prime();
  nn::validate(f.model);
  return f;
}

}  // namespace

std::vector<double> default_activation_coeffs() {
  static const std::vector<double> coeffs = [] {
    const approx::Interval iv = approx::Interval::symmetric(8.0);
    std::vector<double> c = approx::relu_via_derivative(iv, 2, approx::Measure::chebyshev(8.0)).poly.coeffs();
    for (double& v : c) v = static_cast<float>(v);
    return c;
  }();
  return coeffs;
}

ModelFile gen_fixture_model(std::uint64_t seed) {
  he::Prng r = seeded(seed, "cdl-fixture-model");
  nn::FloatModel m;
  m.input_shape = nn::Shape{{1, 8, 8}};
  m.layers.push_back(conv(r, 3, 1, 3));
  m.layers.push_back(batch_norm(r, 3, 60.0));
  m.layers.push_back(pool(2));
  m.layers.push_back(activation());
  m.layers.push_back(dense(r, 10, 27));
  ModelFile f = wrap(std::move(m));
  // The fixture is shallow enough to afford finer first-layer weights, which
  // keeps its integer argmax in line with the float model.
  f.quant.min_weight_bits = 5;
  return f;
}

ModelFile gen_model1(std::uint64_t seed) {
  he::Prng r = seeded(seed, "cdl-model1");
  nn::FloatModel m;
  m.input_shape = nn::Shape{{1, 28, 28}};
  m.layers.push_back(conv(r, 20, 1, 5));
  m.layers.push_back(batch_norm(r, 20, 60.0));
  m.layers.push_back(pool(2));
  m.layers.push_back(conv(r, 50, 20, 5));
  m.layers.push_back(batch_norm(r, 50, 0.6));
  m.layers.push_back(pool(2));
  m.layers.push_back(activation());
  m.layers.push_back(dense(r, 256, 800));
  m.layers.push_back(batch_norm(r, 256, 1.0));
  m.layers.push_back(dense(r, 10, 256));
  return wrap(std::move(m));
}

ModelFile gen_model1_reduced(std::uint64_t seed) {
  he::Prng r = seeded(seed, "cdl-model1-reduced");
  nn::FloatModel m;
  m.input_shape = nn::Shape{{1, 14, 14}};
  m.layers.push_back(conv(r, 4, 1, 3));
  m.layers.push_back(batch_norm(r, 4, 60.0));
  m.layers.push_back(pool(2));
  m.layers.push_back(conv(r, 6, 4, 3));
  m.layers.push_back(batch_norm(r, 6, 0.6));
  m.layers.push_back(pool(2));
  m.layers.push_back(activation());
  m.layers.push_back(dense(r, 16, 24));
  m.layers.push_back(batch_norm(r, 16, 1.0));
  m.layers.push_back(dense(r, 10, 16));
  return wrap(std::move(m));
}

Dataset gen_images(std::uint64_t seed, std::size_t count, std::size_t rows, std::size_t cols) {
  if (rows < 4 || cols < 4) throw ValidationError("synthetic images need at least 4x4 pixels");
  he::Prng r = seeded(seed, "cdl-images");
  Dataset d;
  d.images.rows = rows;
  d.images.cols = cols;
  for (std::size_t n = 0; n < count; ++n) {
    const auto label = static_cast<std::uint8_t>(r.uniform(10));
    std::vector<double> img(rows * cols, 0.0);
    // Each label owns a fixed pair of stroke angles; position and width jitter.
    const double a0 = 0.314159 * label;
    const double a1 = a0 + 1.3 + 0.2 * (label % 3);
    const double cy = 0.5 * static_cast<double>(rows) + (unit(r) - 0.5) * 0.2 * static_cast<double>(rows);
    const double cx = 0.5 * static_cast<double>(cols) + (unit(r) - 0.5) * 0.2 * static_cast<double>(cols);
    const double len = 0.35 * static_cast<double>(std::min(rows, cols));
    const double width = 0.6 + 0.6 * unit(r);
    for (double a : {a0, a1}) {
      const double dy = std::sin(a), dx = std::cos(a);
      for (std::size_t y = 0; y < rows; ++y) {
        for (std::size_t x = 0; x < cols; ++x) {
          const double py = static_cast<double>(y) - cy, px = static_cast<double>(x) - cx;
          const double t = std::clamp(py * dy + px * dx, -len, len);
          const double dist = std::hypot(py - t * dy, px - t * dx);
          img[y * cols + x] += 255.0 * std::exp(-dist * dist / (2.0 * width * width));
        }
      }
    }
    std::vector<std::uint8_t> px(rows * cols);
    for (std::size_t i = 0; i < px.size(); ++i) {
      const double v = img[i] + 12.0 * unit(r);
      px[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    d.images.images.push_back(std::move(px));
    d.labels.push_back(label);
  }
  return d;
}

nn::ModelSpec random_small_model(he::Prng& rng, std::uint64_t p) {
  const auto dim = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.uniform(hi - lo + 1)); };
  const auto residue = [&]() { return quant::to_signed(rng.uniform(p), p); };
  nn::ModelSpec m;
  m.p = p;
  m.input_shape = nn::Shape{{dim(1, 2), dim(3, 8), dim(3, 8)}};
  nn::Shape s = m.input_shape;
  const std::size_t n_layers = dim(1, 4);
  for (std::size_t i = 0; i < n_layers; ++i) {
    nn::LayerSpec l;
    const bool last = i + 1 == n_layers;
    std::uint64_t pick = last ? 3 : rng.uniform(4);
    if (!s.is_image() && (pick == 0 || pick == 1)) pick = 2 + rng.uniform(2);
    if (pick == 1 && (s.dims[1] < 2 || s.dims[2] < 2)) pick = 2;
    if (pick == 0 && (s.dims[1] < 2 || s.dims[2] < 2)) pick = 3;
    switch (pick) {
      case 0: {
        l.kind = LayerKind::Conv2d;
        const std::size_t k = dim(1, std::min<std::size_t>({3, s.dims[1], s.dims[2]}));
        l.conv = {dim(1, 3), s.dims[0], k, k, dim(1, 2)};
        break;
      }
      case 1:
        l.kind = LayerKind::AvgPool;
        l.window = 2;
        break;
      case 2:
        l.kind = LayerKind::PolyActivation;
        l.coeffs.resize(dim(3, 4));
        for (auto& c : l.coeffs) c = residue();
        break;
      default:
        l.kind = LayerKind::Dense;
        l.dense = {dim(1, 8), s.size()};
        break;
    }
    for (std::size_t k = 0; k < l.weight_count(); ++k) l.weights.push_back(residue());
    for (std::size_t k = 0; k < l.bias_count(); ++k) l.bias.push_back(residue());
    s = nn::output_shape(l, s);
    m.layers.push_back(std::move(l));
  }
  m.classes = s.size();
  nn::validate(m);
  return m;
}

std::vector<std::vector<std::uint64_t>> to_instances(const IdxImages& images, const nn::ModelSpec& m) {
  if (m.input_shape.size() != images.rows * images.cols) {
    throw ValidationError("images are " + std::to_string(images.rows) + "x" + std::to_string(images.cols) +
                          " but the model expects " + m.input_shape.str());
  }
  std::vector<std::vector<std::uint64_t>> out;
  out.reserve(images.images.size());
  const quant::FixedPointScale scale{m.input_scale, quant::TensorRole::Input};
  for (const auto& img : images.images) {
    const std::vector<double> real(img.begin(), img.end());
    out.push_back(quant::quantize_tensor(real, scale, m.p));
  }
  return out;
}

std::vector<std::vector<double>> to_real(const IdxImages& images) {
  std::vector<std::vector<double>> out;
  for (const auto& img : images.images) out.emplace_back(img.begin(), img.end());
  return out;
}

}  // namespace cdl::modelio
