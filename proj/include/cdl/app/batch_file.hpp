// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cdl/he/backend.hpp"
#include "cdl/he/ciphertext.hpp"
#include "cdl/he/params.hpp"
#include "cdl/nn/model.hpp"

namespace cdl::app {

// A tensor of ciphertexts on disk or on the wire:
//
//   "CDLB" | u16 version | u32 manifest length | manifest (JSON)
//   then per ciphertext: u32 length | serialized ciphertext
//
// Integers are little-endian. The manifest records the backend, the key id
// of the key pair the batch was encrypted under, the tensor shape and how
// many slots carry real instances.
struct CipherBatch {
  he::BackendKind backend = he::BackendKind::Simulator;
  he::KeyId key_id{};
  nn::Shape shape;
  std::size_t count = 0;
  std::vector<he::Ciphertext> cts;

  bool operator==(const CipherBatch&) const = default;
};

inline constexpr std::array<std::uint8_t, 4> kBatchMagic{'C', 'D', 'L', 'B'};
inline constexpr std::uint16_t kBatchVersion = 1;

he::Bytes serialize_batch(const CipherBatch& b);
// Every ciphertext is range-checked by `be`; the ciphertext count must match
// the shape.
CipherBatch parse_batch(std::span<const std::uint8_t> bytes, const he::Backend& be);

void save_batch(const CipherBatch& b, const std::filesystem::path& path);
CipherBatch load_batch(const std::filesystem::path& path, const he::Backend& be);

}  // namespace cdl::app
