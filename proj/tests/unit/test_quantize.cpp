// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "cdl/error.hpp"
#include "cdl/he/params.hpp"
#include "cdl/he/prng.hpp"
#include "cdl/modelio/fixtures.hpp"
#include "cdl/nn/engine.hpp"
#include "cdl/nn/float_forward.hpp"
#include "cdl/quantize/quantize.hpp"

namespace cdl::quant {
namespace {

using nn::FloatLayer;
using nn::LayerKind;

he::Prng rng_for(const char* tag) {
  const std::string s(tag);
  return he::Prng(std::vector<std::uint8_t>(s.begin(), s.end()), "quantize-tests");
}

double uniform(he::Prng& r, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(r.next_u64() >> 11) * 0x1.0p-53;
}

TEST(Quantize, SpecExamples) {
  const std::vector<double> v = {0.123, -1.0, 0.125};
  const auto q = quantize_tensor(v, {100.0, TensorRole::Input}, 65537);
  EXPECT_EQ(q, (std::vector<std::uint64_t>{12, 65437, 12}));
}

TEST(Quantize, HalfEven) {
  EXPECT_EQ(round_half_even(2.5), 2);
  EXPECT_EQ(round_half_even(3.5), 4);
  EXPECT_EQ(round_half_even(-2.5), -2);
  EXPECT_EQ(round_half_even(-3.5), -4);
  EXPECT_EQ(round_half_even(2.5000001), 3);
}

TEST(Quantize, OverflowRejected) {
  const std::vector<double> ok = {48.0, -48.0}, bad = {49.0}, bad_neg = {-49.0};
  EXPECT_NO_THROW(quantize_tensor(ok, {1.0, TensorRole::Weight}, 97));
  EXPECT_THROW(quantize_tensor(bad, {1.0, TensorRole::Weight}, 97), CapacityError);
  EXPECT_THROW(quantize_tensor(bad_neg, {1.0, TensorRole::Weight}, 97), CapacityError);
  EXPECT_THROW(quantize_tensor(ok, {0.0, TensorRole::Weight}, 97), ValidationError);
}

TEST(Quantize, DequantizeErrorBound) {
  he::Prng r = rng_for("dq");
  for (int i = 0; i < 2000; ++i) {
    const double scale = uniform(r, 0.5, 1000.0);
    const std::vector<double> v = {uniform(r, -20.0, 20.0)};
    const auto q = quantize_tensor(v, {scale, TensorRole::Input}, 65537);
    const auto back = dequantize_tensor(q, {scale, TensorRole::Input}, 65537);
    EXPECT_LE(std::fabs(back[0] - v[0]), 0.5 / scale + 1e-12);
  }
}

TEST(Quantize, SignedRoundTrip) {
  for (std::int64_t v = -48; v <= 48; ++v) EXPECT_EQ(to_signed(to_residue(v, 97), 97), v);
  EXPECT_EQ(to_residue(-1, 97), 96u);
}

// ------------------------------------------------------------ batch norm

FloatLayer random_linear(he::Prng& r, bool conv_layer) {
  FloatLayer l;
  if (conv_layer) {
    l.kind = LayerKind::Conv2d;
    l.conv = {3, 2, 3, 3, 1};
  } else {
    l.kind = LayerKind::Dense;
    l.dense = {5, 7};
  }
  for (std::size_t i = 0; i < l.weight_count(); ++i) l.weights.push_back(uniform(r, -1, 1));
  for (std::size_t i = 0; i < l.bias_count(); ++i) l.bias.push_back(uniform(r, -1, 1));
  return l;
}

nn::BatchNormParams random_bn(he::Prng& r, std::size_t c) {
  nn::BatchNormParams bn;
  bn.eps = 1e-5;
  for (std::size_t i = 0; i < c; ++i) {
    bn.gamma.push_back(uniform(r, -2, 2));
    bn.beta.push_back(uniform(r, -1, 1));
    bn.mean.push_back(uniform(r, -1, 1));
    bn.var.push_back(uniform(r, 0.0, 3.0));
  }
  return bn;
}

TEST(FoldBatchNorm, IdentityLeavesLayerUnchanged) {
  he::Prng r = rng_for("bn-id");
  const FloatLayer l = random_linear(r, false);
  nn::BatchNormParams bn{std::vector<double>(5, 1.0), std::vector<double>(5, 0.0), std::vector<double>(5, 0.0),
                         std::vector<double>(5, 1.0), 0.0};
  EXPECT_EQ(fold_batchnorm(l, bn), l);
  bn.gamma.assign(5, 2.0);
  const FloatLayer doubled = fold_batchnorm(l, bn);
  for (std::size_t i = 0; i < l.weights.size(); ++i) EXPECT_DOUBLE_EQ(doubled.weights[i], 2 * l.weights[i]);
  for (std::size_t i = 0; i < l.bias.size(); ++i) EXPECT_DOUBLE_EQ(doubled.bias[i], 2 * l.bias[i]);
}

// Folded layer versus BN applied explicitly after the layer, 100 instances.
TEST(FoldBatchNorm, MatchesExplicitComposition) {
  he::Prng r = rng_for("bn-fold");
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const bool is_conv = inst % 2 == 0;
    FloatLayer lin = random_linear(r, is_conv);
    FloatLayer bn;
    bn.kind = LayerKind::BatchNorm;
    bn.channels = lin.bias_count();
    bn.bn = random_bn(r, bn.channels);
    nn::FloatModel explicit_model, folded_model;
    explicit_model.input_shape = is_conv ? nn::Shape{{2, 5, 5}} : nn::Shape{{7}};
    explicit_model.layers = {lin, bn};
    folded_model = fold_batchnorms(explicit_model);
    ASSERT_EQ(folded_model.layers.size(), 1u);
    for (int k = 0; k < 3; ++k) {
      std::vector<double> x(explicit_model.input_shape.size());
      for (double& v : x) v = uniform(r, -3, 3);
      const auto a = nn::float_forward(explicit_model, x);
      const auto b = nn::float_forward(folded_model, x);
      for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::fabs(a[i] - b[i]) / std::max(1.0, std::fabs(a[i])));
      }
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(FoldBatchNorm, FoldsAcrossPoolingButNotActivation) {
  he::Prng r = rng_for("bn-pool");
  FloatLayer conv = random_linear(r, true);
  FloatLayer pool;
  pool.kind = LayerKind::AvgPool;
  pool.window = 2;
  FloatLayer bn;
  bn.kind = LayerKind::BatchNorm;
  bn.channels = 3;
  bn.bn = random_bn(r, 3);
  nn::FloatModel m;
  m.input_shape = nn::Shape{{2, 6, 6}};
  m.layers = {conv, pool, bn};
  const nn::FloatModel f = fold_batchnorms(m);
  ASSERT_EQ(f.layers.size(), 2u);
  std::vector<double> x(72);
  for (double& v : x) v = uniform(r, 0, 1);
  const auto a = nn::float_forward(m, x), b = nn::float_forward(f, x);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);

  FloatLayer act;
  act.kind = LayerKind::PolyActivation;
  act.coeffs = {0, 1, 1};
  m.layers = {conv, act, bn};
  EXPECT_THROW(fold_batchnorms(m), ValidationError);
}

// ------------------------------------------------------------ model quantization

TEST(QuantizeModel, ScaleBookkeeping) {
  const modelio::ModelFile f = modelio::gen_model1(5);
  const nn::ModelSpec m = quantize_model(f.model, f.p, f.quant);
  ASSERT_EQ(m.layers.size(), 7u);
  EXPECT_DOUBLE_EQ(m.layers[0].scale_out, 128.0);
  EXPECT_DOUBLE_EQ(m.layers[1].scale_out, 512.0);
  EXPECT_DOUBLE_EQ(m.layers[2].scale_out, 65536.0);
  EXPECT_DOUBLE_EQ(m.layers[3].scale_out, 262144.0);
  // The cubic coefficient is round-off, so the activation is quadratic.
  const double s = 262144.0;
  EXPECT_DOUBLE_EQ(m.layers[4].scale_out, s * s * 128.0);
  const auto& c = modelio::default_activation_coeffs();
  EXPECT_EQ(m.layers[4].coeffs[0], round_half_even(c[0] * s * s * 128.0));
  EXPECT_EQ(m.layers[4].coeffs[1], round_half_even(c[1] * s * 128.0));
  EXPECT_EQ(m.layers[4].coeffs[2], round_half_even(c[2] * 128.0));
  EXPECT_EQ(m.layers[4].coeffs[3], 0);
  EXPECT_DOUBLE_EQ(m.output_scale(), s * s * 128.0 * 128.0 * 128.0);
  EXPECT_EQ(m.classes, 10u);
}

TEST(QuantizeModel, PerLayerScaleOverride) {
  modelio::ModelFile f = modelio::gen_fixture_model(2);
  f.model.layers[0].scale = 1024.0;
  const nn::ModelSpec m = quantize_model(f.model, f.p, f.quant);
  EXPECT_DOUBLE_EQ(m.layers[0].scale_out, 1024.0);
}

// Inputs scaled by 3 with weights and coefficients that quantize exactly:
// every logit scales by 9 (the activation squares its input scale), so the
// argmax cannot move.
TEST(QuantizeModel, ArgmaxInvariantUnderPositiveRescaling) {
  he::Prng r = rng_for("argmax");
  nn::FloatModel m;
  m.input_shape = nn::Shape{{6}};
  FloatLayer d1;
  d1.kind = LayerKind::Dense;
  d1.dense = {4, 6};
  for (int i = 0; i < 24; ++i) d1.weights.push_back(static_cast<double>(static_cast<int>(r.uniform(256)) - 128) / 128.0);
  d1.bias = {0.5, -0.25, 1.0, 0.0};
  FloatLayer act;
  act.kind = LayerKind::PolyActivation;
  act.coeffs = {0.5, 0.25, 1.0 / 128.0};
  FloatLayer d2 = d1;
  d2.dense = {3, 4};
  d2.weights.resize(12);
  d2.bias = {0.0, 0.125, -0.5};
  m.layers = {d1, act, d2};
  const std::uint64_t p = he::wide_plaintext_prime();
  const nn::ModelSpec a = quantize_model(m, p, QuantConfig{1.0, 128.0, 128.0});
  const nn::ModelSpec b = quantize_model(m, p, QuantConfig{3.0, 128.0, 128.0});
  const long double factor = b.output_scale() / a.output_scale();
  EXPECT_DOUBLE_EQ(static_cast<double>(factor), 9.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::uint64_t> xa, xb;
    for (int i = 0; i < 6; ++i) {
      const std::int64_t v = static_cast<std::int64_t>(r.uniform(21)) - 10;
      xa.push_back(to_residue(v, p));
      xb.push_back(to_residue(3 * v, p));
    }
    const auto la = nn::infer_plain(a, {xa})[0];
    const auto lb = nn::infer_plain(b, {xb})[0];
    for (std::size_t k = 0; k < la.size(); ++k) EXPECT_EQ(9 * to_signed(la[k], p), to_signed(lb[k], p));
    EXPECT_EQ(nn::predict(la, p), nn::predict(lb, p));
  }
}

// The fixture's stored quantization settings, 500 synthetic images, a few
// generator seeds.
TEST(QuantizeModel, FixtureArgmaxAgreesWithFloat) {
  const modelio::Dataset d = modelio::gen_images(7, 500, 8, 8);
  const auto real = modelio::to_real(d.images);
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    const modelio::ModelFile f = modelio::gen_fixture_model(seed);
    const nn::ModelSpec m = quantize_model(f.model, f.p, f.quant);
    const auto logits = nn::infer_plain(m, modelio::to_instances(d.images, m));
    std::size_t agree = 0;
    for (std::size_t i = 0; i < real.size(); ++i) {
      agree += nn::argmax(nn::float_forward(f.model, real[i])) == nn::predict(logits[i], m.p);
    }
    EXPECT_GE(static_cast<double>(agree) / 500.0, 0.95) << "seed " << seed;
  }
}

TEST(QuantizeModel, WeightScaleRaisedOnlyForSmallWeights) {
  QuantConfig cfg;
  const std::vector<double> tiny{0.004, -0.006, 0.001};
  const std::vector<double> big{0.5, -0.3};
  EXPECT_DOUBLE_EQ(weight_scale_for(tiny, cfg), 128.0);
  cfg.min_weight_bits = 5;
  // 0.006 * 2048 = 12.3 is below 2^4, 0.006 * 4096 = 24.6 is not.
  EXPECT_DOUBLE_EQ(weight_scale_for(tiny, cfg), 4096.0);
  EXPECT_DOUBLE_EQ(weight_scale_for(big, cfg), 128.0);
  EXPECT_DOUBLE_EQ(weight_scale_for(std::vector<double>{0.0, 0.0}, cfg), 128.0);
}

// ------------------------------------------------------------ capacity

TEST(Capacity, ZeroDenseAlwaysPasses) {
  nn::ModelSpec m;
  m.input_shape = nn::Shape{{4}};
  nn::LayerSpec d;
  d.kind = LayerKind::Dense;
  d.dense = {2, 4};
  d.weights.assign(8, 0);
  d.bias.assign(2, 0);
  m.layers = {d};
  m.classes = 2;
  for (std::uint64_t p : {3ull, 5ull, 97ull}) {
    m.p = p;
    EXPECT_TRUE(capacity_check(m, 0, 0).pass) << p;
  }
}

TEST(Capacity, Model1Outcomes) {
  const modelio::ModelFile f = modelio::gen_model1(1);
  const nn::ModelSpec narrow = quantize_model(f.model, 65537, f.quant);
  const CapacityReport rn = capacity_check(narrow, 0, 255);
  EXPECT_FALSE(rn.pass);
  EXPECT_EQ(rn.layers.size(), 7u);
  // Frozen: default scales need ~65 bits at the logits, beyond the wide prime.
  const nn::ModelSpec wide = quantize_model(f.model, he::wide_plaintext_prime(), f.quant);
  const CapacityReport rw = capacity_check(wide, 0, 255);
  EXPECT_FALSE(rw.pass);
  EXPECT_GT(std::log2(static_cast<double>(rw.layers.back().output_bound)), 60.0);
  EXPECT_TRUE(rw.layers[0].pass);
}

TEST(Capacity, FixturePassesAtWidePrime) {
  const modelio::ModelFile f = modelio::gen_fixture_model(1);
  EXPECT_TRUE(capacity_check(quantize_model(f.model, f.p, f.quant), 0, 255).pass);
  EXPECT_FALSE(capacity_check(quantize_model(f.model, 65537, f.quant), 0, 255).pass);
}

TEST(Capacity, EnlargingRangeNeverHelps) {
  he::Prng r = rng_for("mono");
  for (int t = 0; t < 200; ++t) {
    he::Prng mr = rng_for(("model" + std::to_string(t)).c_str());
    nn::ModelSpec m = modelio::random_small_model(mr, 1000003);
    for (auto& l : m.layers) {
      for (auto& w : l.weights) w %= 5;
      for (auto& c : l.coeffs) c %= 3;
    }
    const double lo = uniform(r, -4, 0), hi = uniform(r, 0, 4);
    const bool inner = capacity_check(m, lo, hi).pass;
    const bool outer = capacity_check(m, lo - uniform(r, 0, 3), hi + uniform(r, 0, 3)).pass;
    EXPECT_FALSE(!inner && outer);
  }
}

TEST(Capacity, ReportJson) {
  const modelio::ModelFile f = modelio::gen_fixture_model(1);
  const std::string j = capacity_check(quantize_model(f.model, f.p, f.quant), 0, 255).to_json();
  EXPECT_NE(j.find("\"pass\": true"), std::string::npos);
  EXPECT_NE(j.find("output_bits"), std::string::npos);
}

}  // namespace
}  // namespace cdl::quant
