// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/he/ciphertext.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cdl/error.hpp"

namespace cdl::he {

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'D', 'L', '1'};
constexpr std::size_t kMaxComponents = 64;
constexpr std::size_t kMaxComponentLen = std::size_t{1} << 24;

void write_header(ByteWriter& w, BackendKind b) {
  w.raw(kMagic);
  w.u8(static_cast<std::uint8_t>(b));
  w.u16(kWireVersion);
}

BackendKind read_header(ByteReader& r, const char* what) {
  const auto magic = r.raw(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ValidationError(std::string(what) + ": bad magic");
  const std::uint8_t b = r.u8();
  if (b != static_cast<std::uint8_t>(BackendKind::Simulator) && b != static_cast<std::uint8_t>(BackendKind::Rlwe)) {
    throw ValidationError(std::string(what) + ": unknown backend id " + std::to_string(b));
  }
  const std::uint16_t version = r.u16();
  if (version != kWireVersion) {
    throw ValidationError(std::string(what) + ": unsupported version " + std::to_string(version));
  }
  return static_cast<BackendKind>(b);
}

}  // namespace

void ByteWriter::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::component(const Component& c) {
  u32(static_cast<std::uint32_t>(c.size()));
  const std::size_t at = out_.size();
  out_.resize(at + 8 * c.size());
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out_.data() + at, c.data(), 8 * c.size());
  } else {
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (int b = 0; b < 8; ++b) out_[at + 8 * i + b] = static_cast<std::uint8_t>(c[i] >> (8 * b));
    }
  }
}

void ByteReader::need(std::size_t n) const {
  if (in_.size() - pos_ < n) throw ValidationError("truncated input");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return in_[pos_++];
}
std::uint16_t ByteReader::u16() {
  need(2);
  std::uint16_t v = 0;
  for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(in_[pos_ + i]) << (8 * i);
  pos_ += 2;
  return v;
}
std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}
std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto s = in_.subspan(pos_, n);
  pos_ += n;
  return s;
}

Component ByteReader::component(std::size_t max_len) {
  const std::uint32_t len = u32();
  if (len > max_len) throw ValidationError("component length " + std::to_string(len) + " exceeds limit");
  need(8 * static_cast<std::size_t>(len));
  Component c(len);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(c.data(), in_.data() + pos_, 8 * static_cast<std::size_t>(len));
    pos_ += 8 * static_cast<std::size_t>(len);
  } else {
    for (auto& v : c) v = u64();
  }
  return c;
}

Bytes serialize_ct(const Ciphertext& ct) {
  ByteWriter w;
  write_header(w, ct.backend);
  w.u32(ct.level);
  w.f64(ct.noise_budget);
  w.u32(static_cast<std::uint32_t>(ct.components.size()));
  for (const Component& c : ct.components) w.component(c);
  return w.take();
}

Ciphertext deserialize_ct(std::span<const std::uint8_t> bytes, const HEParams& params) {
  ByteReader r(bytes);
  Ciphertext ct;
  ct.backend = read_header(r, "ciphertext");
  if (ct.backend != params.backend) throw ValidationError("ciphertext backend does not match params");
  ct.level = r.u32();
  if (ct.level > static_cast<std::uint32_t>(params.L)) throw ValidationError("ciphertext level exceeds L");
  ct.noise_budget = r.f64();
  if (!std::isfinite(ct.noise_budget)) throw ValidationError("ciphertext noise budget is not finite");
  const std::uint32_t count = r.u32();
  if (count != 2) throw ValidationError("ciphertext must have exactly 2 components");
  for (std::uint32_t i = 0; i < count; ++i) ct.components.push_back(r.component(kMaxComponentLen));
  if (!r.done()) throw ValidationError("trailing bytes after ciphertext");
  if (ct.backend == BackendKind::Simulator) {
    if (ct.components[0].size() != params.slot_count || ct.components[1].size() != 2) {
      throw ValidationError("simulator ciphertext has the wrong shape");
    }
    for (std::uint64_t v : ct.components[0]) {
      if (v >= params.p) throw ValidationError("simulator slot value out of range");
    }
  } else {
    const std::size_t len = ct.components[0].size();
    if (len == 0 || len % params.n != 0 || ct.components[1].size() != len) {
      throw ValidationError("rlwe ciphertext has the wrong shape");
    }
  }
  return ct;
}

Bytes serialize_key(const KeyMaterial& key) {
  ByteWriter w;
  write_header(w, key.backend);
  w.u8(static_cast<std::uint8_t>(key.kind));
  w.raw(key.key_id);
  w.u32(static_cast<std::uint32_t>(key.components.size()));
  for (const Component& c : key.components) w.component(c);
  return w.take();
}

KeyMaterial deserialize_key(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  KeyMaterial k;
  k.backend = read_header(r, "key");
  const std::uint8_t kind = r.u8();
  if (kind < 1 || kind > 3) throw ValidationError("unknown key kind " + std::to_string(kind));
  k.kind = static_cast<KeyKind>(kind);
  const auto id = r.raw(k.key_id.size());
  std::copy(id.begin(), id.end(), k.key_id.begin());
  const std::uint32_t count = r.u32();
  if (count > kMaxComponents) throw ValidationError("too many key components");
  for (std::uint32_t i = 0; i < count; ++i) k.components.push_back(r.component(kMaxComponentLen));
  if (!r.done()) throw ValidationError("trailing bytes after key");
  return k;
}

template <class K>
K key_as(KeyMaterial m, KeyKind expected) {
  if (m.kind != expected) throw ValidationError("key file holds the wrong kind of key");
  K k;
  static_cast<KeyMaterial&>(k) = std::move(m);
  return k;
}

template SecretKey key_as<SecretKey>(KeyMaterial, KeyKind);
template PublicKey key_as<PublicKey>(KeyMaterial, KeyKind);
template RelinKey key_as<RelinKey>(KeyMaterial, KeyKind);

SecretKey load_secret_key(const std::filesystem::path& path) {
  return key_as<SecretKey>(deserialize_key(read_file(path)), KeyKind::Secret);
}
PublicKey load_public_key(const std::filesystem::path& path) {
  return key_as<PublicKey>(deserialize_key(read_file(path)), KeyKind::Public);
}
RelinKey load_relin_key(const std::filesystem::path& path) {
  return key_as<RelinKey>(deserialize_key(read_file(path)), KeyKind::Relin);
}
void save_key(const KeyMaterial& key, const std::filesystem::path& path) { write_file(path, serialize_key(key)); }

std::string key_id_hex(const KeyId& id) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : id) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("failed writing " + path.string());
}

}  // namespace cdl::he
