// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/app/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "cdl/approx/basis.hpp"
#include "cdl/error.hpp"
#include "cdl/modelio/fixtures.hpp"
#include "cdl/nn/float_forward.hpp"

namespace cdl::app {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

approx::Measure measure_for(const std::string& family, const approx::Interval& iv) {
  const double l = std::max(std::fabs(iv.lo), std::fabs(iv.hi));
  switch (approx::measure_family_from_string(family)) {
    case approx::MeasureFamily::Lebesgue: return approx::Measure::lebesgue(iv);
    case approx::MeasureFamily::ChebyshevStretched:
      if (iv.lo != -iv.hi) throw ValidationError("the Chebyshev measure needs a symmetric interval [-l, l]");
      return approx::Measure::chebyshev(l);
    case approx::MeasureFamily::GaussianTail: return approx::Measure::gaussian_tail(l, iv);
    case approx::MeasureFamily::ModifiedRelu: return approx::Measure::modified_relu(iv);
  }
  throw ValidationError("unknown measure " + family);
}

}  // namespace

approx::ApproxReport fit(const FitRequest& req) {
  using approx::Method;
  if (req.degree < 0) throw ValidationError("degree must be non-negative");
  switch (req.method) {
    case Method::PointFit: return approx::fit_function(req.activation, req.interval, req.degree, req.samples);
    case Method::Taylor: return approx::taylor_report(req.activation, req.center, req.degree, req.interval);
    case Method::ChebyshevStd:
      return approx::project_activation(req.activation,
                                        approx::gram_schmidt(measure_for("chebyshev", req.interval), req.degree));
    case Method::ChebyshevModified:
      return approx::project_activation(req.activation,
                                        approx::gram_schmidt(measure_for("modified_relu", req.interval), req.degree));
    case Method::DerivativeIntegral: {
      if (req.activation != approx::Activation::ReLU) throw ValidationError("the derivative method targets ReLU only");
      if (req.degree < 2) throw ValidationError("the derivative method needs degree >= 2");
      const std::string family = req.measure.empty() ? "chebyshev" : req.measure;
      return approx::relu_via_derivative(req.interval, req.degree - 1, measure_for(family, req.interval));
    }
    case Method::Projection:
      return approx::project_activation(
          req.activation,
          approx::gram_schmidt(measure_for(req.measure.empty() ? "lebesgue" : req.measure, req.interval), req.degree));
  }
  throw ValidationError("unknown method");
}

CipherBatch encrypt_batch(const he::Backend& be, const he::PublicKey& pk, const nn::ModelSpec& m,
                          const std::vector<Slots>& instances, he::Prng& rng) {
  if (instances.empty()) throw ValidationError("empty batch");
  if (instances.size() > be.slot_count()) {
    throw ValidationError("batch of " + std::to_string(instances.size()) + " exceeds the " +
                          std::to_string(be.slot_count()) + " available slots");
  }
  if (be.p() != m.p) throw ValidationError("model and encryption parameters use different plaintext moduli");
  nn::Tensor<Slots> full = nn::pack_batch(m.input_shape, instances);
  for (Slots& s : full.data) s.resize(be.slot_count(), 0);
  const nn::Tensor<he::Ciphertext> ct = nn::encrypt_tensor(be, pk, full, rng);
  return {be.kind(), pk.key_id, ct.shape, instances.size(), ct.data};
}

CipherBatch infer_batch(const he::Backend& be, const he::RelinKey& rk, const nn::ModelSpec& m, const CipherBatch& in,
                        std::vector<nn::LayerTiming>* timings) {
  if (in.key_id != rk.key_id) {
    throw ValidationError("batch key " + he::key_id_hex(in.key_id) + " does not match relinearization key " +
                          he::key_id_hex(rk.key_id));
  }
  if (in.count == 0) throw ValidationError("empty batch");
  const nn::Tensor<he::Ciphertext> out = nn::infer_encrypted(be, rk, m, {in.shape, in.cts}, timings);
  return {be.kind(), in.key_id, nn::Shape{{out.data.size()}}, in.count, out.data};
}

std::vector<Slots> decrypt_batch(const he::Backend& be, const he::SecretKey& sk, const CipherBatch& result) {
  if (result.key_id != sk.key_id) {
    throw NoiseExhausted("result was encrypted under key " + he::key_id_hex(result.key_id) + " but the secret key is " +
                         he::key_id_hex(sk.key_id));
  }
  const nn::Tensor<Slots> plain = nn::decrypt_tensor(be, sk, {result.shape, result.cts});
  return nn::unpack_batch(plain, result.count);
}

std::string E2EReport::to_json(int indent) const {
  json j = {{"instances", instances},
            {"logits", logits},
            {"logit_mismatches", logit_mismatches},
            {"exact", exact()},
            {"float_agreement", float_agreement},
            {"encrypt_seconds", encrypt_seconds},
            {"infer_seconds", infer_seconds},
            {"decrypt_seconds", decrypt_seconds}};
  if (has_labels) j["label_agreement"] = label_agreement;
  return j.dump(indent);
}

E2EReport run_e2e(const he::Backend& be, const he::KeySet& keys, const modelio::ModelFile& file,
                  const nn::ModelSpec& m, const modelio::Dataset& data, he::Prng& rng) {
  const std::vector<Slots> instances = modelio::to_instances(data.images, m);
  E2EReport r;
  r.instances = instances.size();
  r.has_labels = data.labels.size() == instances.size();

  auto t0 = Clock::now();
  const CipherBatch in = encrypt_batch(be, keys.pub, m, instances, rng);
  r.encrypt_seconds = since(t0);
  t0 = Clock::now();
  const CipherBatch out = infer_batch(be, keys.relin, m, in);
  r.infer_seconds = since(t0);
  t0 = Clock::now();
  const std::vector<Slots> enc = decrypt_batch(be, keys.secret, out);
  r.decrypt_seconds = since(t0);

  const std::vector<Slots> plain = nn::infer_plain(m, instances);
  const std::vector<std::vector<double>> real = modelio::to_real(data.images);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    r.logits += plain[i].size();
    for (std::size_t j = 0; j < plain[i].size(); ++j) r.logit_mismatches += enc[i][j] != plain[i][j];
    const std::size_t cls = nn::predict(enc[i], m.p);
    r.float_agreement += cls == nn::argmax(nn::float_forward(file.model, real[i]));
    if (r.has_labels) r.label_agreement += cls == data.labels[i];
  }
  return r;
}

std::string BenchReport::to_json(int indent) const {
  json layer_list = json::array();
  for (const nn::LayerTiming& t : layers) {
    layer_list.push_back({{"layer", t.layer}, {"output", t.output.str()}, {"seconds", t.seconds}});
  }
  return json{{"backend", he::to_string(params.backend)},
              {"p", params.p},
              {"L", params.L},
              {"slots", params.slot_count},
              {"batch", batch},
              {"seconds",
               {{"keygen", keygen_seconds},
                {"encrypt", encrypt_seconds},
                {"infer", infer_seconds},
                {"decrypt", decrypt_seconds}}},
              {"layers", layer_list},
              {"bytes",
               {{"params", params_bytes},
                {"public_key", public_key_bytes},
                {"relin_key", relin_key_bytes},
                {"input", input_bytes},
                {"result", result_bytes}}}}
      .dump(indent);
}

std::string BenchReport::to_table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "backend %s  p=%llu  L=%d  slots=%zu  batch=%zu\n", he::to_string(params.backend).c_str(),
                static_cast<unsigned long long>(params.p), params.L, params.slot_count, batch);
  os << line;
  std::snprintf(line, sizeof line, "%-40s %-14s %10s\n", "stage", "output", "seconds");
  os << line;
  const auto row = [&](const std::string& stage, const std::string& shape, double s) {
    std::snprintf(line, sizeof line, "%-40s %-14s %10.3f\n", stage.c_str(), shape.c_str(), s);
    os << line;
  };
  row("keygen", "", keygen_seconds);
  row("encrypt", "", encrypt_seconds);
  for (const nn::LayerTiming& t : layers) row(t.layer, t.output.str(), t.seconds);
  row("decrypt", "", decrypt_seconds);
  row("total inference", "", infer_seconds);
  if (batch > 0 && infer_seconds > 0) {
    std::snprintf(line, sizeof line, "predictions per hour: %.0f\n", 3600.0 * static_cast<double>(batch) / infer_seconds);
    os << line;
  }
  os << "bytes client -> server: params " << params_bytes << ", public key " << public_key_bytes << ", relin key "
     << relin_key_bytes << ", input " << input_bytes << "\n";
  os << "bytes server -> client: result " << result_bytes << "\n";
  return os.str();
}

BenchReport bench(const he::HEParams& params, const nn::ModelSpec& m, const modelio::Dataset& data, std::size_t batch,
                  std::uint64_t seed) {
  if (batch == 0 || data.images.images.empty()) throw ValidationError("empty batch");
  const std::vector<Slots> pool = modelio::to_instances(data.images, m);
  std::vector<Slots> instances;
  instances.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) instances.push_back(pool[i % pool.size()]);

  BenchReport r;
  r.params = params;
  r.batch = batch;
  const auto be = he::make_backend(params);
  std::uint8_t seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<std::uint8_t>(seed >> (8 * i));

  auto t0 = Clock::now();
  const he::KeySet keys = be->keygen(seed_bytes);
  r.keygen_seconds = since(t0);
  he::Prng rng(seed_bytes, "bench");
  t0 = Clock::now();
  const CipherBatch in = encrypt_batch(*be, keys.pub, m, instances, rng);
  r.encrypt_seconds = since(t0);
  t0 = Clock::now();
  const CipherBatch out = infer_batch(*be, keys.relin, m, in, &r.layers);
  r.infer_seconds = since(t0);
  t0 = Clock::now();
  decrypt_batch(*be, keys.secret, out);
  r.decrypt_seconds = since(t0);

  r.params_bytes = he::params_to_json(params).size();
  r.public_key_bytes = he::serialize_key(keys.pub).size();
  r.relin_key_bytes = he::serialize_key(keys.relin).size();
  r.input_bytes = serialize_batch(in).size();
  r.result_bytes = serialize_batch(out).size();
  return r;
}

}  // namespace cdl::app
