// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/quantize/quantize.hpp"

#include <json.hpp>

#include <algorithm>
#include <cfenv>
#include <cmath>

#include "cdl/error.hpp"

namespace cdl::quant {

namespace {

constexpr double kMaxMagnitude = 4.0e18;  // stays clear of the int64 edge
constexpr double kNegligibleCoeff = 1e-12;

std::int64_t checked_round(double v, const char* what) {
  if (!std::isfinite(v) || std::fabs(v) >= kMaxMagnitude) {
    throw ValidationError(std::string(what) + " does not fit a 64-bit integer after scaling");
  }
  return round_half_even(v);
}

}  // namespace

std::int64_t round_half_even(double v) {
  // nearbyint honours the current rounding mode; pin it to ties-to-even.
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(v);
  std::fesetround(saved);
  return static_cast<std::int64_t>(r);
}

std::int64_t to_signed(std::uint64_t v, std::uint64_t p) {
  if (v >= p) throw ValidationError("value not reduced mod p");
  return v > p / 2 ? -static_cast<std::int64_t>(p - v) : static_cast<std::int64_t>(v);
}

std::uint64_t to_residue(std::int64_t v, std::uint64_t p) {
  const auto pp = static_cast<std::int64_t>(p);
  std::int64_t r = v % pp;
  if (r < 0) r += pp;
  return static_cast<std::uint64_t>(r);
}

bool fits(long double magnitude, std::uint64_t p) { return 2.0L * magnitude < static_cast<long double>(p); }

std::vector<std::uint64_t> quantize_tensor(std::span<const double> values, const FixedPointScale& scale,
                                           std::uint64_t p) {
  if (!(scale.scale > 0.0) || !std::isfinite(scale.scale)) throw ValidationError("scale must be positive");
  if (p < 3) throw ValidationError("plaintext modulus must be at least 3");
  std::vector<std::uint64_t> out;
  out.reserve(values.size());
  for (double v : values) {
    const std::int64_t r = checked_round(v * scale.scale, "value");
    if (!fits(std::fabs(static_cast<long double>(r)), p)) {
      throw CapacityError("quantized value " + std::to_string(r) + " does not fit in p = " + std::to_string(p));
    }
    out.push_back(to_residue(r, p));
  }
  return out;
}

std::vector<double> dequantize_tensor(std::span<const std::uint64_t> values, const FixedPointScale& scale,
                                      std::uint64_t p) {
  if (!(scale.scale > 0.0)) throw ValidationError("scale must be positive");
  std::vector<double> out;
  out.reserve(values.size());
  for (std::uint64_t v : values) out.push_back(static_cast<double>(to_signed(v, p)) / scale.scale);
  return out;
}

nn::FloatLayer fold_batchnorm(const nn::FloatLayer& linear, const nn::BatchNormParams& bn) {
  if (linear.kind != nn::LayerKind::Conv2d && linear.kind != nn::LayerKind::Dense) {
    throw ValidationError("batch norm can only fold into conv2d or dense layers");
  }
  const std::size_t outs = linear.bias_count();
  if (bn.gamma.size() != outs || bn.beta.size() != outs || bn.mean.size() != outs || bn.var.size() != outs) {
    throw ValidationError("batch norm size differs from the layer's output count");
  }
  nn::FloatLayer out = linear;
  const std::size_t per = linear.weight_count() / outs;
  for (std::size_t o = 0; o < outs; ++o) {
    if (!(bn.var[o] >= 0.0)) throw ValidationError("batch norm variance must be non-negative");
    const double a = bn.gamma[o] / std::sqrt(bn.var[o] + bn.eps);
    for (std::size_t i = 0; i < per; ++i) out.weights[o * per + i] *= a;
    out.bias[o] = (linear.bias[o] - bn.mean[o]) * a + bn.beta[o];
  }
  return out;
}

nn::FloatModel fold_batchnorms(const nn::FloatModel& m) {
  nn::validate(m);
  nn::FloatModel out = m;
  out.layers.clear();
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const nn::FloatLayer& l = m.layers[i];
    if (l.kind != nn::LayerKind::BatchNorm) {
      out.layers.push_back(l);
      continue;
    }
    std::size_t j = out.layers.size();
    while (j > 0 && out.layers[j - 1].kind == nn::LayerKind::AvgPool) --j;
    if (j == 0 || (out.layers[j - 1].kind != nn::LayerKind::Conv2d && out.layers[j - 1].kind != nn::LayerKind::Dense)) {
      throw ValidationError("layer " + std::to_string(i) + ": batch norm has no conv2d or dense layer to fold into");
    }
    out.layers[j - 1] = fold_batchnorm(out.layers[j - 1], l.bn);
  }
  return out;
}

// Coefficients at round-off level (an odd fit's even terms, say) would
// otherwise inflate the output scale by a whole factor of s_in.
int effective_degree(std::span<const double> coeffs) {
  double biggest = 0.0;
  for (double c : coeffs) biggest = std::max(biggest, std::fabs(c));
  int d = static_cast<int>(coeffs.size()) - 1;
  while (d > 0 && std::fabs(coeffs[static_cast<std::size_t>(d)]) <= kNegligibleCoeff * biggest) --d;
  return std::max(d, 0);
}

double weight_scale_for(std::span<const double> weights, const QuantConfig& cfg) {
  double biggest = 0.0;
  for (double w : weights) biggest = std::max(biggest, std::fabs(w));
  double s = cfg.weight_scale;
  if (cfg.min_weight_bits <= 0 || biggest == 0.0) return s;
  const double want = std::ldexp(1.0, cfg.min_weight_bits - 1);  // largest |w| * s reaches 2^(bits-1)
  while (biggest * s < want) s *= 2.0;
  return s;
}

nn::ModelSpec quantize_model(const nn::FloatModel& m, std::uint64_t p, const QuantConfig& cfg) {
  if (!(cfg.input_scale > 0.0) || !(cfg.weight_scale > 0.0) || !(cfg.activation_scale > 0.0)) {
    throw ValidationError("quantization scales must be positive");
  }
  const nn::FloatModel folded = fold_batchnorms(m);
  nn::ModelSpec spec;
  spec.input_shape = folded.input_shape;
  spec.p = p;
  spec.input_scale = cfg.input_scale;
  spec.activation_report = folded.activation_report;
  double s = cfg.input_scale;
  for (const nn::FloatLayer& l : folded.layers) {
    nn::LayerSpec q;
    static_cast<nn::LayerGeom&>(q) = l;
    q.scale_in = s;
    switch (l.kind) {
      case nn::LayerKind::Conv2d:
      case nn::LayerKind::Dense:
      {
        const double ws = l.scale > 0.0 ? l.scale : weight_scale_for(l.weights, cfg);
        for (double w : l.weights) q.weights.push_back(checked_round(w * ws, "weight"));
        s *= ws;
        for (double b : l.bias) q.bias.push_back(checked_round(b * s, "bias"));
        break;
      }
      case nn::LayerKind::AvgPool:
        s *= static_cast<double>(l.window * l.window);
        break;
      case nn::LayerKind::PolyActivation: {
        const int d = effective_degree(l.coeffs);
        const double s_out = std::pow(s, d) * (l.scale > 0.0 ? l.scale : cfg.activation_scale);
        for (std::size_t k = 0; k < l.coeffs.size(); ++k) {
          q.coeffs.push_back(checked_round(l.coeffs[k] * s_out / std::pow(s, static_cast<double>(k)), "coefficient"));
        }
        s = s_out;
        break;
      }
      case nn::LayerKind::Flatten:
      case nn::LayerKind::BatchNorm:
        break;
    }
    if (!std::isfinite(s)) throw ValidationError("accumulated scale overflows");
    q.scale_out = s;
    spec.layers.push_back(std::move(q));
  }
  const auto shapes = nn::layer_shapes(spec);
  spec.classes = shapes.empty() ? spec.input_shape.size() : shapes.back().size();
  return spec;
}

// ------------------------------------------------------------ capacity

namespace {

struct Iv {
  long double lo = 0, hi = 0;
  long double mag() const { return std::max(std::fabs(lo), std::fabs(hi)); }
};

Iv scale_iv(const Iv& x, long double w) { return w >= 0 ? Iv{x.lo * w, x.hi * w} : Iv{x.hi * w, x.lo * w}; }

Iv power_iv(const Iv& x, std::size_t k) {
  if (k == 0) return {1, 1};
  const long double a = std::pow(x.lo, static_cast<long double>(k));
  const long double b = std::pow(x.hi, static_cast<long double>(k));
  if (k % 2 == 1) return {a, b};
  if (x.lo <= 0 && x.hi >= 0) return {0, std::max(a, b)};
  return {std::min(a, b), std::max(a, b)};
}

}  // namespace

CapacityReport capacity_check(const nn::ModelSpec& m, double lo, double hi) {
  if (!(lo <= hi)) throw ValidationError("input range must satisfy lo <= hi");
  nn::validate(m, nn::ModelLimits{0, 64});
  CapacityReport rep;
  rep.p = m.p;
  const Iv in{std::nearbyint(static_cast<long double>(lo) * m.input_scale),
              std::nearbyint(static_cast<long double>(hi) * m.input_scale)};
  rep.input_bound = in.mag();
  rep.pass = fits(rep.input_bound, m.p);
  std::vector<Iv> x(m.input_shape.size(), in);
  nn::Shape s = m.input_shape;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const nn::LayerSpec& l = m.layers[li];
    const nn::Shape os = nn::output_shape(l, s);
    std::vector<Iv> y(os.size());
    long double params = 0;
    for (std::int64_t v : l.weights) params = std::max(params, std::fabs(static_cast<long double>(v)));
    for (std::int64_t v : l.bias) params = std::max(params, std::fabs(static_cast<long double>(v)));
    for (std::int64_t v : l.coeffs) params = std::max(params, std::fabs(static_cast<long double>(v)));
    switch (l.kind) {
      case nn::LayerKind::Conv2d: {
        const nn::Conv2dGeom& c = l.conv;
        const std::size_t H = s.dims[1], W = s.dims[2], OH = os.dims[1], OW = os.dims[2];
        for (std::size_t o = 0; o < c.out_ch; ++o) {
          for (std::size_t i = 0; i < OH; ++i) {
            for (std::size_t j = 0; j < OW; ++j) {
              Iv acc{static_cast<long double>(l.bias[o]), static_cast<long double>(l.bias[o])};
              for (std::size_t ch = 0; ch < c.in_ch; ++ch) {
                for (std::size_t u = 0; u < c.kh; ++u) {
                  for (std::size_t v = 0; v < c.kw; ++v) {
                    const Iv t = scale_iv(x[(ch * H + i * c.stride + u) * W + j * c.stride + v],
                                          static_cast<long double>(l.weights[((o * c.in_ch + ch) * c.kh + u) * c.kw + v]));
                    acc.lo += t.lo;
                    acc.hi += t.hi;
                  }
                }
              }
              y[(o * OH + i) * OW + j] = acc;
            }
          }
        }
        break;
      }
      case nn::LayerKind::Dense:
        for (std::size_t o = 0; o < l.dense.out; ++o) {
          Iv acc{static_cast<long double>(l.bias[o]), static_cast<long double>(l.bias[o])};
          for (std::size_t i = 0; i < l.dense.in; ++i) {
            const Iv t = scale_iv(x[i], static_cast<long double>(l.weights[o * l.dense.in + i]));
            acc.lo += t.lo;
            acc.hi += t.hi;
          }
          y[o] = acc;
        }
        break;
      case nn::LayerKind::AvgPool: {
        const std::size_t w = l.window, H = s.dims[1], W = s.dims[2], OH = os.dims[1], OW = os.dims[2];
        for (std::size_t ch = 0; ch < os.dims[0]; ++ch) {
          for (std::size_t i = 0; i < OH; ++i) {
            for (std::size_t j = 0; j < OW; ++j) {
              Iv acc;
              for (std::size_t u = 0; u < w; ++u) {
                for (std::size_t v = 0; v < w; ++v) {
                  const Iv& t = x[(ch * H + i * w + u) * W + j * w + v];
                  acc.lo += t.lo;
                  acc.hi += t.hi;
                }
              }
              y[(ch * OH + i) * OW + j] = acc;
            }
          }
        }
        break;
      }
      case nn::LayerKind::PolyActivation:
        for (std::size_t e = 0; e < x.size(); ++e) {
          Iv acc;
          for (std::size_t k = 0; k < l.coeffs.size(); ++k) {
            const Iv t = scale_iv(power_iv(x[e], k), static_cast<long double>(l.coeffs[k]));
            acc.lo += t.lo;
            acc.hi += t.hi;
          }
          y[e] = acc;
        }
        break;
      case nn::LayerKind::Flatten:
      case nn::LayerKind::BatchNorm:
        y = x;
        break;
    }
    LayerBound b;
    b.layer = std::to_string(li) + ":" + nn::describe(l);
    for (const Iv& v : y) b.output_bound = std::max(b.output_bound, v.mag());
    b.param_bound = params;
    b.pass = fits(b.output_bound, m.p) && fits(b.param_bound, m.p);
    rep.pass = rep.pass && b.pass;
    rep.layers.push_back(b);
    x = std::move(y);
    s = os;
  }
  return rep;
}

std::string CapacityReport::to_json(int indent) const {
  nlohmann::json j;
  j["p"] = p;
  j["p_bits"] = std::log2(static_cast<double>(p));
  j["input_bound"] = static_cast<double>(input_bound);
  j["pass"] = pass;
  j["layers"] = nlohmann::json::array();
  for (const LayerBound& b : layers) {
    const double ob = static_cast<double>(b.output_bound);
    j["layers"].push_back({{"layer", b.layer},
                           {"output_bound", ob},
                           {"output_bits", ob > 0 ? std::log2(ob) : 0.0},
                           {"param_bound", static_cast<double>(b.param_bound)},
                           {"pass", b.pass}});
  }
  return j.dump(indent);
}

}  // namespace cdl::quant
