// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "cdl/he/prng.hpp"
#include "cdl/modelio/mnist.hpp"
#include "cdl/modelio/model_file.hpp"
#include "cdl/nn/model.hpp"

namespace cdl::modelio {

// Degree-3 ReLU replacement obtained by integrating the quadratic sigmoid
// projection on [-8, 8] under the stretched Chebyshev weight.
std::vector<double> default_activation_coeffs();

// Deterministic models with random weights (f32-representable so blob
// round-trips are exact). BatchNorm layers are included unfolded.
//  - fixture: 1x8x8 input, conv 3@3x3, bn, pool 2, activation, dense 27->10.
//  - model1: 1x28x28, conv 20@5x5, bn, pool 2, conv 50@5x5, bn, pool 2,
//    activation, dense 800->256, bn, dense 256->10.
//  - model1_reduced: the same layer pattern on a 1x14x14 input with 4 and 6
//    filters of 3x3 and a 24->16->10 head.
ModelFile gen_fixture_model(std::uint64_t seed);
ModelFile gen_model1(std::uint64_t seed);
ModelFile gen_model1_reduced(std::uint64_t seed);

// Synthetic digit-like images with pixels in [0, 255]: a few bright strokes
// on a dark, slightly noisy background. Labels are the stroke pattern ids.
Dataset gen_images(std::uint64_t seed, std::size_t count, std::size_t rows, std::size_t cols);

// Quantized random model for equivalence testing: at most four layers, every
// dimension at most 8, weights uniform over the balanced residues mod p.
nn::ModelSpec random_small_model(he::Prng& rng, std::uint64_t p);

// Images as the engine's per-instance residue vectors (pixels times the
// model's input scale).
std::vector<std::vector<std::uint64_t>> to_instances(const IdxImages& images, const nn::ModelSpec& m);
std::vector<std::vector<double>> to_real(const IdxImages& images);

}  // namespace cdl::modelio
