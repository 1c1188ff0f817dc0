// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "cdl/nn/model.hpp"
#include "cdl/quantize/quantize.hpp"

namespace cdl::modelio {

inline constexpr int kFormatVersion = 1;

// Everything a model file carries besides the layers.
struct ModelFile {
  nn::FloatModel model;
  std::uint64_t p = 0;  // 0 when the file does not pin a modulus
  quant::QuantConfig quant;
};

// Parses a manifest. `base_dir` resolves the blob path.
ModelFile parse_model_file(const std::string& manifest, const std::filesystem::path& base_dir);
ModelFile load_model_file(const std::filesystem::path& path);

// Writes the manifest and, when `use_blob` is set, a sibling little-endian
// f32 blob (same stem, ".bin"). Inline weights keep full double precision.
void save_model_file(const ModelFile& file, const std::filesystem::path& path, bool use_blob = true);
std::string model_manifest(const ModelFile& file, const std::string& blob_name, std::vector<std::uint8_t>* blob);

// Load, fold batch norms and quantize. `p` overrides the file's modulus.
nn::ModelSpec load_model(const std::filesystem::path& path, std::optional<std::uint64_t> p = std::nullopt,
                         const nn::ModelLimits& limits = {});
nn::ModelSpec model_spec(const ModelFile& file, std::optional<std::uint64_t> p = std::nullopt,
                         const nn::ModelLimits& limits = {});

}  // namespace cdl::modelio
