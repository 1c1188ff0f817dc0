// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdl/nn/model.hpp"

namespace cdl::quant {

enum class TensorRole : std::uint8_t { Input, Weight, Bias };

struct FixedPointScale {
  double scale = 1.0;  // multiplier applied before rounding
  TensorRole role = TensorRole::Weight;
};

// Ties go to the even neighbour.
std::int64_t round_half_even(double v);

// Signed integers live in [0, p) with values above p/2 read as negative.
std::int64_t to_signed(std::uint64_t v, std::uint64_t p);
std::uint64_t to_residue(std::int64_t v, std::uint64_t p);
// True when |v| < p/2, i.e. v has a unique balanced representative.
bool fits(long double magnitude, std::uint64_t p);

// round_half_even(v * scale) in [0, p). Throws CapacityError when the
// rounded magnitude reaches p/2 and ValidationError for a bad scale.
std::vector<std::uint64_t> quantize_tensor(std::span<const double> values, const FixedPointScale& scale,
                                           std::uint64_t p);
std::vector<double> dequantize_tensor(std::span<const std::uint64_t> values, const FixedPointScale& scale,
                                      std::uint64_t p);

// Folds y = BN(linear(x)) into a single linear layer (conv: per output
// channel, dense: per output feature).
nn::FloatLayer fold_batchnorm(const nn::FloatLayer& linear, const nn::BatchNormParams& bn);

// Removes every BatchNorm layer by folding it into the closest preceding
// conv or dense layer. Average pooling in between is fine since both act
// per channel; an activation in between is rejected.
nn::FloatModel fold_batchnorms(const nn::FloatModel& m);

struct QuantConfig {
  double input_scale = 1.0;
  double weight_scale = 128.0;
  // Extra factor an activation adds on top of s_in^d so that its highest
  // coefficient keeps some precision.
  double activation_scale = 128.0;
  // A weight tensor's scale is raised above weight_scale (by powers of two)
  // until its largest magnitude keeps this many significant bits. Batch
  // norm folding on raw pixel inputs leaves first-layer weights near 1e-3,
  // which weight_scale alone would round to {-1, 0, 1}. 0 (the default)
  // keeps every weight at weight_scale.
  int min_weight_bits = 0;
};

// Scale for one weight tensor under `cfg`.
double weight_scale_for(std::span<const double> weights, const QuantConfig& cfg);

// Degree once round-off-sized leading coefficients are dropped.
int effective_degree(std::span<const double> coeffs);

// Folds batch norms, then rewrites every tensor as integers:
//  - conv / dense weights at weight_scale_for, biases at the accumulated scale;
//  - pooling sums the window, so the scale grows by window^2;
//  - activation coefficients c_k become round(c_k * s_out / s_in^k) with
//    s_out = s_in^d * activation_scale and d = effective_degree.
// Magnitudes are not checked against p here; see capacity_check.
nn::ModelSpec quantize_model(const nn::FloatModel& m, std::uint64_t p, const QuantConfig& cfg = {});

struct LayerBound {
  std::string layer;
  long double output_bound = 0;  // worst-case |value| of the layer output
  long double param_bound = 0;    // largest |weight|, |bias| or |coefficient|
  bool pass = true;
};

struct CapacityReport {
  std::uint64_t p = 0;
  long double input_bound = 0;
  std::vector<LayerBound> layers;
  bool pass = true;

  std::string to_json(int indent = 2) const;
};

// Interval propagation of the integer model over inputs in [lo, hi] (real
// units, multiplied by the model's input scale).
CapacityReport capacity_check(const nn::ModelSpec& m, double lo, double hi);

}  // namespace cdl::quant
