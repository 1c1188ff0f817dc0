// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdl/app/batch_file.hpp"
#include "cdl/approx/approximate.hpp"
#include "cdl/he/backend.hpp"
#include "cdl/modelio/mnist.hpp"
#include "cdl/modelio/model_file.hpp"
#include "cdl/nn/engine.hpp"

namespace cdl::app {

using Slots = std::vector<std::uint64_t>;

// ------------------------------------------------------------ fit

struct FitRequest {
  approx::Activation activation = approx::Activation::ReLU;
  approx::Method method = approx::Method::DerivativeIntegral;
  int degree = 3;  // degree of the returned activation polynomial
  approx::Interval interval = approx::Interval::symmetric(8.0);
  // Measure family for projection methods; empty picks the method's own.
  std::string measure;
  double center = 0.0;        // Taylor expansion point
  std::size_t samples = 1001; // point fit
};

approx::ApproxReport fit(const FitRequest& req);

// ------------------------------------------------------------ file pipeline

// Packs quantized instances (see modelio::to_instances) across the slots
// and encrypts one ciphertext per input element.
CipherBatch encrypt_batch(const he::Backend& be, const he::PublicKey& pk, const nn::ModelSpec& m,
                          const std::vector<Slots>& instances, he::Prng& rng);

// The server-side step shared by the file pipeline and the TCP service.
// The result is flattened: one ciphertext per logit.
CipherBatch infer_batch(const he::Backend& be, const he::RelinKey& rk, const nn::ModelSpec& m, const CipherBatch& in,
                        std::vector<nn::LayerTiming>* timings = nullptr);

// Per-instance logits. Throws NoiseExhausted when the batch was encrypted
// under a different key or the ciphertexts no longer decrypt.
std::vector<Slots> decrypt_batch(const he::Backend& be, const he::SecretKey& sk, const CipherBatch& result);

// ------------------------------------------------------------ end to end

struct E2EReport {
  std::size_t instances = 0;
  std::size_t logits = 0;
  std::size_t logit_mismatches = 0;     // encrypted vs plaintext mode, per logit
  std::size_t float_agreement = 0;      // argmax equal to the float oracle
  std::size_t label_agreement = 0;      // argmax equal to the label, if labels were given
  bool has_labels = false;
  double encrypt_seconds = 0.0;
  double infer_seconds = 0.0;
  double decrypt_seconds = 0.0;

  bool exact() const { return logit_mismatches == 0; }
  std::string to_json(int indent = 2) const;
};

// Encrypts `data`, runs the encrypted model, decrypts, and compares with
// plaintext-mode inference and with the float model.
E2EReport run_e2e(const he::Backend& be, const he::KeySet& keys, const modelio::ModelFile& file,
                  const nn::ModelSpec& m, const modelio::Dataset& data, he::Prng& rng);

// ------------------------------------------------------------ bench

struct BenchReport {
  he::HEParams params;
  std::size_t batch = 0;
  double keygen_seconds = 0.0;
  double encrypt_seconds = 0.0;
  double infer_seconds = 0.0;
  double decrypt_seconds = 0.0;
  std::vector<nn::LayerTiming> layers;
  // Bytes each side sends in the client/server exchange.
  std::size_t params_bytes = 0;
  std::size_t public_key_bytes = 0;
  std::size_t relin_key_bytes = 0;
  std::size_t input_bytes = 0;
  std::size_t result_bytes = 0;

  std::string to_json(int indent = 2) const;
  std::string to_table() const;
};

// One encrypted inference over a batch of `batch` instances drawn from
// `data` (cycled when shorter).
BenchReport bench(const he::HEParams& params, const nn::ModelSpec& m, const modelio::Dataset& data, std::size_t batch,
                  std::uint64_t seed);

}  // namespace cdl::app
