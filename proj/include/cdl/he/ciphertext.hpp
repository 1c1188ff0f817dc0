// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cdl/he/params.hpp"

namespace cdl::he {

using Bytes = std::vector<std::uint8_t>;
using Component = std::vector<std::uint64_t>;

inline constexpr std::uint16_t kWireVersion = 1;

// Simulator: components = {slot values, {nonce, key tag}}.
// Rlwe: components = {c0, c1}, each k*n residues in coefficient form,
// prime-major.
struct Ciphertext {
  BackendKind backend = BackendKind::Simulator;
  std::uint32_t level = 0;
  double noise_budget = 0.0;
  std::vector<Component> components;

  bool operator==(const Ciphertext&) const = default;
};

Bytes serialize_ct(const Ciphertext& ct);
// Checks the framing and that the payload has the shape `params` implies.
Ciphertext deserialize_ct(std::span<const std::uint8_t> bytes, const HEParams& params);

enum class KeyKind : std::uint8_t { Secret = 1, Public = 2, Relin = 3 };

using KeyId = std::array<std::uint8_t, 16>;

struct KeyMaterial {
  BackendKind backend = BackendKind::Simulator;
  KeyKind kind = KeyKind::Secret;
  KeyId key_id{};
  std::vector<Component> components;

  bool operator==(const KeyMaterial&) const = default;
};

struct SecretKey : KeyMaterial {};
struct PublicKey : KeyMaterial {};
struct RelinKey : KeyMaterial {};

struct KeySet {
  SecretKey secret;
  PublicKey pub;
  RelinKey relin;
};

Bytes serialize_key(const KeyMaterial& key);
KeyMaterial deserialize_key(std::span<const std::uint8_t> bytes);

template <class K>
K key_as(KeyMaterial m, KeyKind expected);

SecretKey load_secret_key(const std::filesystem::path& path);
PublicKey load_public_key(const std::filesystem::path& path);
RelinKey load_relin_key(const std::filesystem::path& path);
void save_key(const KeyMaterial& key, const std::filesystem::path& path);

std::string key_id_hex(const KeyId& id);

// Little-endian framing helpers shared with the batch and wire formats.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void component(const Component& c);
  Bytes take() { return std::move(out_); }
  Bytes& bytes() { return out_; }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::span<const std::uint8_t> raw(std::size_t n);
  Component component(std::size_t max_len);
  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cdl::he
