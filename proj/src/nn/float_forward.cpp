// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/nn/float_forward.hpp"

#include <cmath>

#include "cdl/error.hpp"

namespace cdl::nn {

namespace {

std::vector<double> conv(const FloatLayer& l, const Shape& in, const Shape& out, std::span<const double> x) {
  const Conv2dGeom& c = l.conv;
  const std::size_t H = in.dims[1], W = in.dims[2];
  const std::size_t OH = out.dims[1], OW = out.dims[2];
  std::vector<double> y(out.size());
  for (std::size_t o = 0; o < c.out_ch; ++o) {
    for (std::size_t i = 0; i < OH; ++i) {
      for (std::size_t j = 0; j < OW; ++j) {
        double acc = l.bias[o];
        for (std::size_t ch = 0; ch < c.in_ch; ++ch) {
          for (std::size_t u = 0; u < c.kh; ++u) {
            for (std::size_t v = 0; v < c.kw; ++v) {
              acc += l.weights[((o * c.in_ch + ch) * c.kh + u) * c.kw + v] *
                     x[(ch * H + i * c.stride + u) * W + j * c.stride + v];
            }
          }
        }
        y[(o * OH + i) * OW + j] = acc;
      }
    }
  }
  return y;
}

std::vector<double> pool(std::size_t w, const Shape& in, const Shape& out, std::span<const double> x) {
  const std::size_t H = in.dims[1], W = in.dims[2];
  const std::size_t OH = out.dims[1], OW = out.dims[2];
  std::vector<double> y(out.size());
  for (std::size_t ch = 0; ch < out.dims[0]; ++ch) {
    for (std::size_t i = 0; i < OH; ++i) {
      for (std::size_t j = 0; j < OW; ++j) {
        double acc = 0.0;
        for (std::size_t u = 0; u < w; ++u) {
          for (std::size_t v = 0; v < w; ++v) acc += x[(ch * H + i * w + u) * W + j * w + v];
        }
        y[(ch * OH + i) * OW + j] = acc / static_cast<double>(w * w);
      }
    }
  }
  return y;
}

}  // namespace

std::vector<double> float_forward(const FloatModel& m, std::span<const double> input,
                                  std::vector<std::vector<double>>* trace) {
  if (input.size() != m.input_shape.size()) {
    throw ValidationError("input has " + std::to_string(input.size()) + " values, model expects " +
                          std::to_string(m.input_shape.size()));
  }
  std::vector<double> x(input.begin(), input.end());
  Shape s = m.input_shape;
  for (const FloatLayer& l : m.layers) {
    const Shape out = output_shape(l, s);
    switch (l.kind) {
      case LayerKind::Conv2d: x = conv(l, s, out, x); break;
      case LayerKind::AvgPool: x = pool(l.window, s, out, x); break;
      case LayerKind::Dense: {
        std::vector<double> y(l.dense.out);
        for (std::size_t o = 0; o < l.dense.out; ++o) {
          double acc = l.bias[o];
          for (std::size_t i = 0; i < l.dense.in; ++i) acc += l.weights[o * l.dense.in + i] * x[i];
          y[o] = acc;
        }
        x = std::move(y);
        break;
      }
      case LayerKind::PolyActivation:
        for (double& v : x) {
          double acc = 0.0;
          for (std::size_t k = l.coeffs.size(); k-- > 0;) acc = acc * v + l.coeffs[k];
          v = acc;
        }
        break;
      case LayerKind::BatchNorm: {
        const std::size_t per = x.size() / l.channels;
        for (std::size_t c = 0; c < l.channels; ++c) {
          const double a = l.bn.gamma[c] / std::sqrt(l.bn.var[c] + l.bn.eps);
          for (std::size_t i = 0; i < per; ++i) {
            double& v = x[c * per + i];
            v = (v - l.bn.mean[c]) * a + l.bn.beta[c];
          }
        }
        break;
      }
      case LayerKind::Flatten: break;
    }
    s = out;
    if (trace) trace->push_back(x);
  }
  return x;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace cdl::nn
