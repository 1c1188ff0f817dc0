// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace cdl::nn {

// (channels, height, width) for feature maps, (features) after dense layers.
struct Shape {
  std::vector<std::size_t> dims;

  std::size_t size() const;
  bool is_image() const { return dims.size() == 3; }
  std::string str() const;
  bool operator==(const Shape&) const = default;
};

enum class LayerKind : std::uint8_t { Conv2d, AvgPool, PolyActivation, Dense, Flatten, BatchNorm };

std::string to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

struct Conv2dGeom {
  std::size_t out_ch = 0;
  std::size_t in_ch = 0;
  std::size_t kh = 0;
  std::size_t kw = 0;
  std::size_t stride = 1;
  bool operator==(const Conv2dGeom&) const = default;
};

struct DenseGeom {
  std::size_t out = 0;
  std::size_t in = 0;
  bool operator==(const DenseGeom&) const = default;
};

// Everything needed to infer shapes; shared by the real-valued and the
// quantized layer types.
struct LayerGeom {
  LayerKind kind = LayerKind::Flatten;
  Conv2dGeom conv;
  DenseGeom dense;
  std::size_t window = 2;  // AvgPool
  std::size_t channels = 0;  // BatchNorm feature count

  std::size_t weight_count() const;
  std::size_t bias_count() const;
  bool operator==(const LayerGeom&) const = default;
};

// Throws ValidationError when `in` does not fit the layer.
Shape output_shape(const LayerGeom& g, const Shape& in);

struct BatchNormParams {
  std::vector<double> gamma, beta, mean, var;
  double eps = 1e-5;
  bool operator==(const BatchNormParams&) const = default;
};

// Real-valued layer as trained. AvgPool means the window average here; the
// integer engine sums instead and carries the factor in the scale.
struct FloatLayer : LayerGeom {
  std::vector<double> weights;  // conv [o][c][u][v], dense [o][i]
  std::vector<double> bias;
  std::vector<double> coeffs;   // activation, ascending powers
  BatchNormParams bn;
  // Per-layer override of the weight scale (conv / dense) or the activation
  // scale; 0 keeps the quantizer default.
  double scale = 0.0;
  bool operator==(const FloatLayer&) const = default;
};

struct FloatModel {
  Shape input_shape;
  std::vector<FloatLayer> layers;
  std::string activation_report;  // id of the approximation the activation came from
  bool operator==(const FloatModel&) const = default;
};

// Integer layer ready for the engine. Weights, biases and activation
// coefficients are signed and get lifted into [0, p) at evaluation time.
struct LayerSpec : LayerGeom {
  std::vector<std::int64_t> weights;
  std::vector<std::int64_t> bias;
  std::vector<std::int64_t> coeffs;
  double scale_in = 1.0;   // scale of the integers entering the layer
  double scale_out = 1.0;  // scale of the integers leaving it
  bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
  Shape input_shape;
  std::size_t classes = 0;
  std::uint64_t p = 0;
  double input_scale = 1.0;
  std::vector<LayerSpec> layers;
  std::string activation_report;

  double output_scale() const { return layers.empty() ? input_scale : layers.back().scale_out; }
  bool operator==(const ModelSpec&) const = default;
};

// Activation degrees accepted by validate(); the defaults match the
// quadratic and cubic replacements this library produces.
struct ModelLimits {
  int min_degree = 2;
  int max_degree = 3;
};

// Shape per layer output (index i is the output of layer i). Throws
// ValidationError on the first layer that does not compose.
std::vector<Shape> layer_shapes(const FloatModel& m);
std::vector<Shape> layer_shapes(const ModelSpec& m);

void validate(const FloatModel& m);
void validate(const ModelSpec& m, const ModelLimits& limits = {});

std::string describe(const LayerGeom& g);

}  // namespace cdl::nn
