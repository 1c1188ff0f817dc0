// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/nn/model.hpp"

#include <sstream>

#include "cdl/error.hpp"

namespace cdl::nn {

std::size_t Shape::size() const {
  if (dims.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
  return os.str();
}

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::AvgPool: return "avg_pool";
    case LayerKind::PolyActivation: return "poly_activation";
    case LayerKind::Dense: return "dense";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::BatchNorm: return "batch_norm";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  for (LayerKind k : {LayerKind::Conv2d, LayerKind::AvgPool, LayerKind::PolyActivation, LayerKind::Dense,
                      LayerKind::Flatten, LayerKind::BatchNorm}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown layer type '" + s + "'");
}

std::size_t LayerGeom::weight_count() const {
  switch (kind) {
    case LayerKind::Conv2d: return conv.out_ch * conv.in_ch * conv.kh * conv.kw;
    case LayerKind::Dense: return dense.out * dense.in;
    default: return 0;
  }
}

std::size_t LayerGeom::bias_count() const {
  switch (kind) {
    case LayerKind::Conv2d: return conv.out_ch;
    case LayerKind::Dense: return dense.out;
    default: return 0;
  }
}

Shape output_shape(const LayerGeom& g, const Shape& in) {
  const auto fail = [&](const std::string& why) {
    throw ValidationError(to_string(g.kind) + " cannot take input " + in.str() + ": " + why);
  };
  if (in.size() == 0) fail("empty input");
  switch (g.kind) {
    case LayerKind::Conv2d: {
      const Conv2dGeom& c = g.conv;
      if (!in.is_image()) fail("expected channels x height x width");
      if (c.out_ch == 0 || c.kh == 0 || c.kw == 0 || c.stride == 0) fail("zero-sized filter or stride");
      if (in.dims[0] != c.in_ch) fail("channel count differs from in_ch");
      if (in.dims[1] < c.kh || in.dims[2] < c.kw) fail("filter larger than input");
      return Shape{{c.out_ch, (in.dims[1] - c.kh) / c.stride + 1, (in.dims[2] - c.kw) / c.stride + 1}};
    }
    case LayerKind::AvgPool:
      if (!in.is_image()) fail("expected channels x height x width");
      if (g.window == 0 || in.dims[1] < g.window || in.dims[2] < g.window) fail("bad pooling window");
      return Shape{{in.dims[0], in.dims[1] / g.window, in.dims[2] / g.window}};
    case LayerKind::Dense:
      if (g.dense.out == 0) fail("zero outputs");
      if (in.size() != g.dense.in) fail("feature count differs from in");
      return Shape{{g.dense.out}};
    case LayerKind::Flatten:
      return Shape{{in.size()}};
    case LayerKind::BatchNorm:
      if (g.channels != in.dims[0]) fail("feature count differs from batch norm size");
      return in;
    case LayerKind::PolyActivation:
      return in;
  }
  fail("unknown layer");
  return in;
}

namespace {

template <class Model>
std::vector<Shape> shapes_of(const Model& m) {
  std::vector<Shape> out;
  Shape s = m.input_shape;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    try {
      s = output_shape(m.layers[i], s);
    } catch (const ValidationError& e) {
      throw ValidationError("layer " + std::to_string(i) + ": " + e.what());
    }
    out.push_back(s);
  }
  return out;
}

void check_counts(std::size_t i, const LayerGeom& g, std::size_t w, std::size_t b) {
  if (w != g.weight_count() || b != g.bias_count()) {
    throw ValidationError("layer " + std::to_string(i) + " (" + to_string(g.kind) + "): expected " +
                          std::to_string(g.weight_count()) + " weights and " + std::to_string(g.bias_count()) +
                          " biases, got " + std::to_string(w) + " and " + std::to_string(b));
  }
}

}  // namespace

std::vector<Shape> layer_shapes(const FloatModel& m) { return shapes_of(m); }
std::vector<Shape> layer_shapes(const ModelSpec& m) { return shapes_of(m); }

void validate(const FloatModel& m) {
  if (m.input_shape.size() == 0) throw ValidationError("model input shape is empty");
  (void)layer_shapes(m);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const FloatLayer& l = m.layers[i];
    check_counts(i, l, l.weights.size(), l.bias.size());
    if (l.kind == LayerKind::PolyActivation && l.coeffs.empty()) {
      throw ValidationError("layer " + std::to_string(i) + ": activation without coefficients");
    }
    if (l.kind == LayerKind::BatchNorm) {
      const BatchNormParams& bn = l.bn;
      const std::size_t c = l.channels;
      if (bn.gamma.size() != c || bn.beta.size() != c || bn.mean.size() != c || bn.var.size() != c) {
        throw ValidationError("layer " + std::to_string(i) + ": batch norm vectors must have one entry per channel");
      }
      for (double v : bn.var) {
        if (!(v >= 0.0)) throw ValidationError("layer " + std::to_string(i) + ": negative batch norm variance");
      }
      if (!(bn.eps >= 0.0)) throw ValidationError("batch norm eps must be non-negative");
    }
  }
}

void validate(const ModelSpec& m, const ModelLimits& limits) {
  if (m.input_shape.size() == 0) throw ValidationError("model input shape is empty");
  if (m.p < 3) throw ValidationError("plaintext modulus must be at least 3");
  const std::vector<Shape> shapes = layer_shapes(m);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    if (l.kind == LayerKind::BatchNorm) {
      throw ValidationError("layer " + std::to_string(i) + ": batch norm must be folded before quantization");
    }
    check_counts(i, l, l.weights.size(), l.bias.size());
    if (l.kind == LayerKind::PolyActivation) {
      const int degree = static_cast<int>(l.coeffs.size()) - 1;
      if (degree < limits.min_degree || degree > limits.max_degree) {
        throw ValidationError("layer " + std::to_string(i) + ": activation degree " + std::to_string(degree) +
                              " outside [" + std::to_string(limits.min_degree) + ", " +
                              std::to_string(limits.max_degree) + "]");
      }
    }
    if (!(l.scale_in > 0.0) || !(l.scale_out > 0.0)) {
      throw ValidationError("layer " + std::to_string(i) + ": scales must be positive");
    }
  }
  const std::size_t out = shapes.empty() ? m.input_shape.size() : shapes.back().size();
  if (m.classes != 0 && out != m.classes) {
    throw ValidationError("model produces " + std::to_string(out) + " logits but declares " +
                          std::to_string(m.classes) + " classes");
  }
}

std::string describe(const LayerGeom& g) {
  std::ostringstream os;
  os << to_string(g.kind);
  switch (g.kind) {
    case LayerKind::Conv2d:
      os << ' ' << g.conv.out_ch << '@' << g.conv.kh << 'x' << g.conv.kw << " s" << g.conv.stride;
      break;
    case LayerKind::AvgPool: os << ' ' << g.window << 'x' << g.window; break;
    case LayerKind::Dense: os << ' ' << g.dense.in << "->" << g.dense.out; break;
    default: break;
  }
  return os.str();
}

}  // namespace cdl::nn
