// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "cdl/nn/model.hpp"

namespace cdl::nn {

// Real-valued forward pass of a trained model, used as the reference the
// integer engine is compared against. When `trace` is given it receives
// the output of every layer.
std::vector<double> float_forward(const FloatModel& m, std::span<const double> input,
                                  std::vector<std::vector<double>>* trace = nullptr);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);

}  // namespace cdl::nn
