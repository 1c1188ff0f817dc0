// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cdl/error.hpp"
#include "cdl/modelio/fixtures.hpp"
#include "cdl/modelio/mnist.hpp"
#include "cdl/modelio/model_file.hpp"
#include "cdl/nn/engine.hpp"

namespace cdl::modelio {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("cdl-modelio-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                       "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

using ModelFileTest = TempDir;
using IdxTest = TempDir;

TEST_F(ModelFileTest, BlobRoundTrip) {
  const ModelFile f = gen_model1_reduced(4);
  save_model_file(f, dir / "m.json");
  EXPECT_TRUE(fs::exists(dir / "m.bin"));
  const ModelFile back = load_model_file(dir / "m.json");
  EXPECT_EQ(back.model, f.model);
  EXPECT_EQ(back.p, f.p);
}

TEST_F(ModelFileTest, InlineRoundTripKeepsDoubles) {
  ModelFile f = gen_fixture_model(4);
  f.model.layers[0].weights[0] = 0.1;  // not representable in f32
  f.model.layers[0].scale = 64.0;
  save_model_file(f, dir / "m.json", false);
  EXPECT_FALSE(fs::exists(dir / "m.bin"));
  EXPECT_EQ(load_model_file(dir / "m.json").model, f.model);
}

TEST_F(ModelFileTest, TruncatedBlobRejected) {
  save_model_file(gen_fixture_model(1), dir / "m.json");
  fs::resize_file(dir / "m.bin", fs::file_size(dir / "m.bin") - 4);
  EXPECT_THROW(load_model_file(dir / "m.json"), ValidationError);
  fs::remove(dir / "m.bin");
  EXPECT_THROW(load_model_file(dir / "m.json"), ValidationError);
}

TEST_F(ModelFileTest, Model1LoadsWithSevenLayers) {
  save_model_file(gen_model1(1), dir / "model1.json");
  const nn::ModelSpec m = load_model(dir / "model1.json");
  EXPECT_EQ(m.layers.size(), 7u);
  EXPECT_EQ(m.classes, 10u);
  EXPECT_EQ(m.p, he::wide_plaintext_prime());
  EXPECT_EQ(load_model(dir / "model1.json", 65537).p, 65537u);
}

TEST_F(ModelFileTest, SchemaViolations) {
  const std::string good = model_manifest(gen_fixture_model(1), "", nullptr);
  EXPECT_NO_THROW(parse_model_file(good, dir));
  const auto mutate = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    s.replace(at, from.size(), to);
    return s;
  };
  EXPECT_THROW(parse_model_file("[]", dir), ValidationError);
  EXPECT_THROW(parse_model_file("{", dir), ValidationError);
  EXPECT_THROW(parse_model_file(mutate("\"format_version\": 1", "\"format_version\": 2"), dir), ValidationError);
  EXPECT_THROW(parse_model_file(mutate("\"conv2d\"", "\"conv3d\""), dir), ValidationError);
  EXPECT_THROW(parse_model_file(mutate("\"in\": 27", "\"in\": 26"), dir), ValidationError);
  EXPECT_THROW(parse_model_file(mutate("\"window\": 2", "\"window\": 0"), dir), ValidationError);
  EXPECT_THROW(parse_model_file(mutate("\"input_shape\": [\n    1,\n    8,", "\"input_shape\": [\n    2,\n    8,"), dir),
               ValidationError);
}

TEST_F(ModelFileTest, MissingModulus) {
  ModelFile f = gen_fixture_model(1);
  f.p = 0;
  save_model_file(f, dir / "m.json");
  EXPECT_THROW(load_model(dir / "m.json"), ValidationError);
  EXPECT_NO_THROW(load_model(dir / "m.json", 65537));
}

TEST(Fixtures, DeterministicBySeed) {
  EXPECT_EQ(gen_model1(3).model, gen_model1(3).model);
  EXPECT_NE(gen_model1(3).model, gen_model1(4).model);
  const Dataset a = gen_images(1, 5, 28, 28), b = gen_images(1, 5, 28, 28);
  EXPECT_EQ(a.images.images, b.images.images);
  EXPECT_EQ(a.labels, b.labels);
  he::Prng r1(he::Bytes{1}), r2(he::Bytes{1});
  EXPECT_EQ(random_small_model(r1, 97), random_small_model(r2, 97));
}

TEST_F(IdxTest, SyntheticRoundTrip) {
  IdxImages imgs;
  imgs.rows = 2;
  imgs.cols = 3;
  imgs.images = {{0, 1, 2, 3, 4, 255}, {9, 8, 7, 6, 5, 4}};
  write_idx_images(dir / "img.idx", imgs);
  write_idx_labels(dir / "lbl.idx", {3, 9});
  const Dataset d = load_mnist(dir / "img.idx", dir / "lbl.idx");
  EXPECT_EQ(d.images.rows, 2u);
  EXPECT_EQ(d.images.cols, 3u);
  EXPECT_EQ(d.images.images, imgs.images);
  EXPECT_EQ(d.labels, (std::vector<std::uint8_t>{3, 9}));
  const auto raw = encode_idx_images(imgs);
  EXPECT_EQ(raw[2], 0x08);
  EXPECT_EQ(raw[3], 0x03);
  EXPECT_EQ(raw[7], 2);  // big-endian count
}

TEST(Idx, EveryMagicMutationRejected) {
  IdxImages imgs;
  imgs.rows = imgs.cols = 2;
  imgs.images = {{1, 2, 3, 4}};
  const auto good_i = encode_idx_images(imgs);
  const auto good_l = encode_idx_labels({1});
  for (std::size_t byte = 0; byte < 4; ++byte) {
    for (int v = 0; v < 256; ++v) {
      if (v == good_i[byte]) continue;
      auto bad = good_i;
      bad[byte] = static_cast<std::uint8_t>(v);
      EXPECT_THROW(parse_idx_images(bad), ValidationError);
    }
    for (int v = 0; v < 256; ++v) {
      if (v == good_l[byte]) continue;
      auto bad = good_l;
      bad[byte] = static_cast<std::uint8_t>(v);
      EXPECT_THROW(parse_idx_labels(bad), ValidationError);
    }
  }
}

TEST(Idx, TruncationAndBadLabels) {
  IdxImages imgs;
  imgs.rows = imgs.cols = 2;
  imgs.images = {{1, 2, 3, 4}, {5, 6, 7, 8}};
  auto bytes = encode_idx_images(imgs);
  bytes.pop_back();
  EXPECT_THROW(parse_idx_images(bytes), ValidationError);
  EXPECT_THROW(parse_idx_images(std::vector<std::uint8_t>(10, 0)), ValidationError);
  EXPECT_THROW(parse_idx_labels(encode_idx_labels({1, 10})), ValidationError);
  auto lbl = encode_idx_labels({1, 2});
  lbl.pop_back();
  EXPECT_THROW(parse_idx_labels(lbl), ValidationError);
}

TEST_F(IdxTest, CountMismatchBetweenFiles) {
  IdxImages imgs;
  imgs.rows = imgs.cols = 1;
  imgs.images = {{1}, {2}};
  write_idx_images(dir / "i", imgs);
  write_idx_labels(dir / "l", {1});
  EXPECT_THROW(load_mnist(dir / "i", dir / "l"), ValidationError);
}

}  // namespace
}  // namespace cdl::modelio
