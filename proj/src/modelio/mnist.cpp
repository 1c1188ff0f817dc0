// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/modelio/mnist.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "cdl/error.hpp"

namespace cdl::modelio {

namespace {

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

IdxImages parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) throw ValidationError("IDX image file truncated in the header");
  const std::uint32_t magic = be32(bytes, 0);
  if (magic != kIdxImagesMagic) throw ValidationError("bad IDX image magic " + hex(magic));
  const std::uint64_t count = be32(bytes, 4);
  IdxImages out;
  out.rows = be32(bytes, 8);
  out.cols = be32(bytes, 12);
  const std::uint64_t pixels = static_cast<std::uint64_t>(out.rows) * out.cols;
  if (pixels == 0) throw ValidationError("IDX images have zero size");
  if (count * pixels != bytes.size() - 16) {
    throw ValidationError("IDX image payload is " + std::to_string(bytes.size() - 16) + " bytes, header implies " +
                          std::to_string(count * pixels));
  }
  out.images.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(16 + i * pixels);
    out.images.emplace_back(first, first + static_cast<std::ptrdiff_t>(pixels));
  }
  return out;
}

std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8) throw ValidationError("IDX label file truncated in the header");
  const std::uint32_t magic = be32(bytes, 0);
  if (magic != kIdxLabelsMagic) throw ValidationError("bad IDX label magic " + hex(magic));
  const std::uint64_t count = be32(bytes, 4);
  if (count != bytes.size() - 8) {
    throw ValidationError("IDX label payload is " + std::to_string(bytes.size() - 8) + " bytes, header says " +
                          std::to_string(count));
  }
  std::vector<std::uint8_t> out(bytes.begin() + 8, bytes.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] > 9) throw ValidationError("label " + std::to_string(i) + " is " + std::to_string(out[i]) + ", not a digit");
  }
  return out;
}

IdxImages read_idx_images(const std::filesystem::path& path) { return parse_idx_images(slurp(path)); }
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) { return parse_idx_labels(slurp(path)); }

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  std::vector<std::uint8_t> b;
  put32(b, kIdxImagesMagic);
  put32(b, static_cast<std::uint32_t>(images.images.size()));
  put32(b, static_cast<std::uint32_t>(images.rows));
  put32(b, static_cast<std::uint32_t>(images.cols));
  for (const auto& img : images.images) {
    if (img.size() != images.rows * images.cols) throw ValidationError("image size differs from rows x cols");
    b.insert(b.end(), img.begin(), img.end());
  }
  return b;
}

std::vector<std::uint8_t> encode_idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> b;
  put32(b, kIdxLabelsMagic);
  put32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  spill(path, encode_idx_images(images));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  spill(path, encode_idx_labels(labels));
}

Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
  Dataset d{read_idx_images(images), read_idx_labels(labels)};
  if (d.images.images.size() != d.labels.size()) {
    throw ValidationError(std::to_string(d.images.images.size()) + " images but " + std::to_string(d.labels.size()) +
                          " labels");
  }
  return d;
}

}  // namespace cdl::modelio
