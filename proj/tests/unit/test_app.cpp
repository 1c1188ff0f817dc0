// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "cdl/app/batch_file.hpp"
#include "cdl/app/pipeline.hpp"
#include "cdl/app/session.hpp"
#include "cdl/approx/report.hpp"
#include "cdl/error.hpp"
#include "cdl/modelio/fixtures.hpp"

namespace cdl::app {
namespace {

namespace fs = std::filesystem;

TEST(Session, FlagsBeatEnvironmentBeatConfigFile) {
  const Settings file{{"batch", "10"}, {"host", "file-host"}, {"model", "file.json"}};
  const Settings env{{"batch", "20"}, {"host", "env-host"}};
  const Settings flags{{"batch", "30"}};
  const SessionConfig c = resolve_session(flags, env, file);
  EXPECT_EQ(c.batch, 30u);
  EXPECT_EQ(c.host, "env-host");
  EXPECT_EQ(c.model, "file.json");
  EXPECT_EQ(resolve_session({}, env, file).batch, 20u);
  EXPECT_EQ(resolve_session({}, {}, file).batch, 10u);
  EXPECT_EQ(resolve_session({}, {}, {}).batch, 8192u);
}

TEST(Session, KeyPathsDefaultIntoKeyDirectory) {
  SessionConfig c = resolve_session({{"keys", "k"}}, {}, {});
  EXPECT_EQ(c.params_path(), fs::path("k/params.json"));
  EXPECT_EQ(c.secret_key_path(), fs::path("k/secret.key"));
  EXPECT_EQ(c.relin_key_path(), fs::path("k/relin.key"));
  c = resolve_session({{"keys", "k"}, {"public-key", "elsewhere.key"}}, {}, {});
  EXPECT_EQ(c.public_key_path(), fs::path("elsewhere.key"));
}

TEST(Session, RejectsUnknownKeysAndBadNumbers) {
  EXPECT_THROW(resolve_session({{"colour", "red"}}, {}, {}), ValidationError);
  EXPECT_THROW(resolve_session({}, {{"batch", "12x"}}, {}), ValidationError);
  EXPECT_THROW(resolve_session({}, {}, {{"port", "70000"}}), ValidationError);
}

TEST(Session, EnvironmentNames) {
  EXPECT_EQ(env_name("secret-key"), "CDL_SECRET_KEY");
  const std::map<std::string, std::string> fake{{"CDL_BATCH", "64"}, {"CDL_PORT", ""}, {"OTHER", "x"}};
  const Settings s = session_env([&](const char* n) -> const char* {
    const auto it = fake.find(n);
    return it == fake.end() ? nullptr : it->second.c_str();
  });
  EXPECT_EQ(s, (Settings{{"batch", "64"}}));
}

TEST(Session, BatchMustFitTheSlots) {
  SessionConfig c;
  EXPECT_NO_THROW(c.check_batch(8192));
  c.batch = 8193;
  EXPECT_THROW(c.check_batch(8192), ValidationError);
  c.batch = 0;
  EXPECT_THROW(c.check_batch(8192), ValidationError);
}

TEST(Fit, DerivativeBeatsTaylorOnWideInterval) {
  FitRequest r;
  r.method = approx::Method::DerivativeIntegral;
  const approx::ApproxReport ours = fit(r);
  r.method = approx::Method::Taylor;
  const approx::ApproxReport taylor = fit(r);
  EXPECT_EQ(ours.poly.degree(), 3);
  EXPECT_LT(ours.sup_error, taylor.sup_error);
}

TEST(Fit, DerivativeNeedsDegreeTwo) {
  FitRequest r;
  r.degree = 1;
  EXPECT_THROW(fit(r), ValidationError);
  r.degree = 3;
  r.activation = approx::Activation::Sigmoid;
  EXPECT_THROW(fit(r), ValidationError);
}

TEST(Fit, EveryMethodProducesAReportThatRoundTrips) {
  for (const char* m : {"point_fit", "taylor", "chebyshev", "chebyshev_modified", "derivative", "projection"}) {
    FitRequest r;
    r.method = approx::method_from_string(m);
    const approx::ApproxReport rep = fit(r);
    const approx::ApproxReport back = approx::report_from_json(approx::report_to_json(rep));
    EXPECT_EQ(back.poly.coeffs(), rep.poly.coeffs()) << m;
    EXPECT_EQ(back.method, rep.method) << m;
    EXPECT_DOUBLE_EQ(back.sup_error, rep.sup_error) << m;
  }
}

class PipelineTest : public ::testing::TestWithParam<he::BackendKind> {
 protected:
  void SetUp() override {
    file = modelio::gen_fixture_model(2);
    model = modelio::model_spec(file);
    params = nn::recommend_params(model, GetParam(), GetParam() == he::BackendKind::Rlwe ? 1024 : 64);
    be = he::make_backend(params);
    keys = be->keygen(he::Bytes{1, 2, 3});
    data = modelio::gen_images(5, 64, 8, 8);
  }

  modelio::ModelFile file;
  nn::ModelSpec model;
  he::HEParams params;
  std::unique_ptr<he::Backend> be;
  he::KeySet keys;
  modelio::Dataset data;
};

TEST_P(PipelineTest, EndToEndMatchesPlaintextExactly) {
  he::Prng rng(he::Bytes{9}, "e2e");
  const E2EReport r = run_e2e(*be, keys, file, model, data, rng);
  EXPECT_EQ(r.instances, 64u);
  EXPECT_EQ(r.logits, 640u);
  EXPECT_EQ(r.logit_mismatches, 0u);
  EXPECT_EQ(r.float_agreement, 64u);
}

TEST_P(PipelineTest, BatchRoundTripsThroughBytes) {
  he::Prng rng(he::Bytes{4}, "rt");
  const CipherBatch b = encrypt_batch(*be, keys.pub, model, modelio::to_instances(data.images, model), rng);
  EXPECT_EQ(b.cts.size(), 64u);
  EXPECT_EQ(b.count, 64u);
  const he::Bytes bytes = serialize_batch(b);
  EXPECT_EQ(parse_batch(bytes, *be), b);
  EXPECT_EQ(serialize_batch(parse_batch(bytes, *be)), bytes);

  he::Bytes bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_batch(bad, *be), ValidationError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(parse_batch(bad, *be), ValidationError);
  bad = bytes;
  bad.resize(bad.size() - 3);
  EXPECT_THROW(parse_batch(bad, *be), ValidationError);
}

TEST_P(PipelineTest, EncryptionIsDeterministicGivenTheSeed) {
  const auto inst = modelio::to_instances(data.images, model);
  he::Prng a(he::Bytes{4}, "enc"), b(he::Bytes{4}, "enc"), c(he::Bytes{5}, "enc");
  const CipherBatch x = encrypt_batch(*be, keys.pub, model, inst, a);
  EXPECT_EQ(serialize_batch(x), serialize_batch(encrypt_batch(*be, keys.pub, model, inst, b)));
  EXPECT_NE(serialize_batch(x), serialize_batch(encrypt_batch(*be, keys.pub, model, inst, c)));
}

TEST_P(PipelineTest, WrongKeyIsFlagged) {
  he::Prng rng(he::Bytes{4}, "wk");
  const CipherBatch in = encrypt_batch(*be, keys.pub, model, modelio::to_instances(data.images, model), rng);
  const CipherBatch out = infer_batch(*be, keys.relin, model, in);
  const he::KeySet other = be->keygen(he::Bytes{7, 7});
  EXPECT_THROW(decrypt_batch(*be, other.secret, out), NoiseExhausted);
  // Even with the key id forged, decryption itself refuses.
  he::SecretKey forged = other.secret;
  forged.key_id = keys.secret.key_id;
  EXPECT_THROW(decrypt_batch(*be, forged, out), NoiseExhausted);
  EXPECT_THROW(infer_batch(*be, other.relin, model, in), ValidationError);
}

TEST_P(PipelineTest, EmptyAndOversizedBatchesAreRejected) {
  he::Prng rng(he::Bytes{4}, "e");
  EXPECT_THROW(encrypt_batch(*be, keys.pub, model, {}, rng), ValidationError);
  std::vector<Slots> many(be->slot_count() + 1, modelio::to_instances(data.images, model)[0]);
  EXPECT_THROW(encrypt_batch(*be, keys.pub, model, many, rng), ValidationError);
}

INSTANTIATE_TEST_SUITE_P(Backends, PipelineTest, ::testing::Values(he::BackendKind::Simulator, he::BackendKind::Rlwe),
                         [](const auto& info) { return he::to_string(info.param); });

TEST(Bench, ReportsEveryLayerAndTheTransferSizes) {
  const nn::ModelSpec m = modelio::model_spec(modelio::gen_fixture_model(1));
  const BenchReport r = bench(nn::recommend_params(m, he::BackendKind::Simulator, 32), m,
                              modelio::gen_images(1, 8, 8, 8), 32, 1);
  EXPECT_EQ(r.layers.size(), m.layers.size());
  EXPECT_GT(r.input_bytes, r.result_bytes);
  EXPECT_GT(r.public_key_bytes, 0u);
  EXPECT_NE(r.to_table().find("predictions per hour"), std::string::npos);
  EXPECT_NE(r.to_json().find("\"layers\""), std::string::npos);
}

}  // namespace
}  // namespace cdl::app
