// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/app/batch_file.hpp"

#include <algorithm>
#include <json.hpp>

#include "cdl/error.hpp"
#include "cdl/he/backend.hpp"

namespace cdl::app {

using nlohmann::json;

namespace {

he::KeyId key_id_from_hex(const std::string& hex) {
  he::KeyId id{};
  if (hex.size() != 2 * id.size()) throw ValidationError("batch manifest: key_id must be 32 hex digits");
  for (std::size_t i = 0; i < id.size(); ++i) {
    unsigned v = 0;
    for (int j = 0; j < 2; ++j) {
      const char c = hex[2 * i + j];
      unsigned d;
      if (c >= '0' && c <= '9') d = c - '0';
      else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
      else throw ValidationError("batch manifest: key_id is not lowercase hex");
      v = v * 16 + d;
    }
    id[i] = static_cast<std::uint8_t>(v);
  }
  return id;
}

}  // namespace

he::Bytes serialize_batch(const CipherBatch& b) {
  if (b.cts.size() != b.shape.size()) throw ValidationError("batch holds a different number of ciphertexts than its shape");
  const json manifest = {{"backend", he::to_string(b.backend)},
                         {"key_id", he::key_id_hex(b.key_id)},
                         {"shape", b.shape.dims},
                         {"count", b.count},
                         {"ciphertexts", b.cts.size()}};
  const std::string text = manifest.dump();
  he::ByteWriter w;
  w.raw(kBatchMagic);
  w.u16(kBatchVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  for (const he::Ciphertext& ct : b.cts) {
    const he::Bytes bytes = he::serialize_ct(ct);
    w.u32(static_cast<std::uint32_t>(bytes.size()));
    w.raw(bytes);
  }
  return w.take();
}

CipherBatch parse_batch(std::span<const std::uint8_t> bytes, const he::Backend& be) {
  he::ByteReader r(bytes);
  CipherBatch b;
  const auto magic = r.raw(kBatchMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kBatchMagic.begin())) throw ValidationError("not a ciphertext batch");
  if (r.u16() != kBatchVersion) throw ValidationError("unsupported batch version");
  const std::uint32_t len = r.u32();
  const auto text = r.raw(len);
  json m;
  try {
    m = json::parse(text.begin(), text.end());
    b.backend = he::backend_from_string(m.at("backend").get<std::string>());
    b.key_id = key_id_from_hex(m.at("key_id").get<std::string>());
    b.shape.dims = m.at("shape").get<std::vector<std::size_t>>();
    b.count = m.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("batch manifest: ") + e.what());
  }
  if (b.backend != be.kind()) throw ValidationError("batch was produced by the " + he::to_string(b.backend) + " backend");
  if (b.shape.dims.empty() || b.shape.dims.size() > 3) throw ValidationError("batch shape must have 1 to 3 dimensions");
  std::size_t n = 1;
  for (std::size_t d : b.shape.dims) {
    if (d == 0 || d > (1u << 24) || n > (1u << 24) / d) throw ValidationError("batch shape is out of range");
    n *= d;
  }
  if (b.count == 0) throw ValidationError("empty batch");
  if (b.count > be.slot_count()) throw ValidationError("batch count exceeds the slot count");
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t ct_len = r.u32();
    b.cts.push_back(be.deserialize(r.raw(ct_len)));
  }
  if (!r.done()) throw ValidationError("trailing bytes after the last ciphertext");
  return b;
}

void save_batch(const CipherBatch& b, const std::filesystem::path& path) { he::write_file(path, serialize_batch(b)); }

CipherBatch load_batch(const std::filesystem::path& path, const he::Backend& be) {
  return parse_batch(he::read_file(path), be);
}

}  // namespace cdl::app
