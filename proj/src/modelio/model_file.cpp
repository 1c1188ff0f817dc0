// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/modelio/model_file.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cdl/error.hpp"

namespace cdl::modelio {

using nlohmann::json;
using nn::FloatLayer;
using nn::LayerKind;

namespace {

static_assert(std::endian::native == std::endian::little, "blob reader assumes a little-endian host");

std::vector<std::uint8_t> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class TensorReader {
 public:
  TensorReader(const json& root, const std::filesystem::path& base) {
    if (root.contains("blob")) {
      blob_path_ = base / root.at("blob").get<std::string>();
      blob_ = read_all(blob_path_);
      has_blob_ = true;
    }
  }

  // Either an inline array of numbers or {"offset": bytes, "length": floats}.
  std::vector<double> read(const json& j, const std::string& what, std::size_t expected) const {
    std::vector<double> out;
    if (j.is_array()) {
      for (const json& v : j) {
        if (!v.is_number()) throw ValidationError(what + ": non-numeric entry");
        out.push_back(v.get<double>());
      }
    } else if (j.is_object()) {
      if (!has_blob_) throw ValidationError(what + ": blob reference without a \"blob\" file");
      const auto offset = j.at("offset").get<std::uint64_t>();
      const auto length = j.at("length").get<std::uint64_t>();
      if (offset % 4 != 0) throw ValidationError(what + ": blob offset must be a multiple of 4");
      if (length > blob_.size() / 4 || offset > blob_.size() - 4 * length) {
        throw ValidationError(what + ": blob range exceeds " + blob_path_.string() + " (" +
                              std::to_string(blob_.size()) + " bytes)");
      }
      out.resize(length);
      for (std::size_t i = 0; i < length; ++i) {
        float f;
        std::memcpy(&f, blob_.data() + offset + 4 * i, 4);
        out[i] = f;
      }
    } else {
      throw ValidationError(what + ": expected an array or a blob reference");
    }
    if (out.size() != expected) {
      throw ValidationError(what + ": expected " + std::to_string(expected) + " values, got " +
                            std::to_string(out.size()));
    }
    for (double v : out) {
      if (!std::isfinite(v)) throw ValidationError(what + ": non-finite value");
    }
    return out;
  }

 private:
  bool has_blob_ = false;
  std::filesystem::path blob_path_;
  std::vector<std::uint8_t> blob_;
};

std::size_t positive(const json& params, const char* key) {
  const auto v = params.at(key).get<std::int64_t>();
  if (v <= 0) throw ValidationError(std::string(key) + " must be positive");
  return static_cast<std::size_t>(v);
}

FloatLayer parse_layer(const json& j, const TensorReader& tensors, std::size_t index) {
  const std::string where = "layer " + std::to_string(index);
  FloatLayer l;
  l.kind = nn::layer_kind_from_string(j.at("type").get<std::string>());
  const json params = j.value("params", json::object());
  if (!params.is_object()) throw ValidationError(where + ": params must be an object");
  if (j.contains("scale") && !j["scale"].is_null()) {
    l.scale = j["scale"].get<double>();
    if (!(l.scale > 0.0) || !std::isfinite(l.scale)) throw ValidationError(where + ": scale must be positive");
  }
  switch (l.kind) {
    case LayerKind::Conv2d:
      l.conv = {positive(params, "out_ch"), positive(params, "in_ch"), positive(params, "kh"), positive(params, "kw"),
                params.contains("stride") ? positive(params, "stride") : 1};
      l.weights = tensors.read(j.at("weights"), where + " weights", l.weight_count());
      l.bias = tensors.read(j.at("bias"), where + " bias", l.bias_count());
      break;
    case LayerKind::Dense:
      l.dense = {positive(params, "out"), positive(params, "in")};
      l.weights = tensors.read(j.at("weights"), where + " weights", l.weight_count());
      l.bias = tensors.read(j.at("bias"), where + " bias", l.bias_count());
      break;
    case LayerKind::AvgPool:
      l.window = positive(params, "window");
      break;
    case LayerKind::PolyActivation: {
      const json& c = params.at("coeffs");
      if (!c.is_array() || c.empty()) throw ValidationError(where + ": coeffs must be a non-empty array");
      l.coeffs = tensors.read(c, where + " coeffs", c.size());
      break;
    }
    case LayerKind::BatchNorm:
      l.channels = positive(params, "channels");
      l.bn.eps = params.value("eps", 1e-5);
      l.bn.gamma = tensors.read(j.at("gamma"), where + " gamma", l.channels);
      l.bn.beta = tensors.read(j.at("beta"), where + " beta", l.channels);
      l.bn.mean = tensors.read(j.at("mean"), where + " mean", l.channels);
      l.bn.var = tensors.read(j.at("var"), where + " var", l.channels);
      break;
    case LayerKind::Flatten:
      break;
  }
  return l;
}

}  // namespace

ModelFile parse_model_file(const std::string& manifest, const std::filesystem::path& base_dir) {
  ModelFile f;
  try {
    const json root = json::parse(manifest);
    if (!root.is_object()) throw ValidationError("model manifest must be a JSON object");
    const int version = root.at("format_version").get<int>();
    if (version != kFormatVersion) throw ValidationError("unsupported model format_version " + std::to_string(version));
    for (const json& d : root.at("input_shape")) {
      const auto v = d.get<std::int64_t>();
      if (v <= 0) throw ValidationError("input_shape entries must be positive");
      f.model.input_shape.dims.push_back(static_cast<std::size_t>(v));
    }
    f.p = root.value("p", std::uint64_t{0});
    f.model.activation_report = root.value("activation_report", std::string());
    if (root.contains("quantization")) {
      const json& q = root["quantization"];
      f.quant.input_scale = q.value("input_scale", f.quant.input_scale);
      f.quant.weight_scale = q.value("weight_scale", f.quant.weight_scale);
      f.quant.activation_scale = q.value("activation_scale", f.quant.activation_scale);
      f.quant.min_weight_bits = q.value("min_weight_bits", f.quant.min_weight_bits);
    }
    const TensorReader tensors(root, base_dir);
    const json& layers = root.at("layers");
    if (!layers.is_array()) throw ValidationError("layers must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) f.model.layers.push_back(parse_layer(layers[i], tensors, i));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model manifest: ") + e.what());
  }
  nn::validate(f.model);
  return f;
}

ModelFile load_model_file(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_all(path);
  return parse_model_file(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

std::string model_manifest(const ModelFile& file, const std::string& blob_name, std::vector<std::uint8_t>* blob) {
  const auto tensor = [&](const std::vector<double>& v) -> json {
    if (!blob) return v;
    const std::size_t offset = blob->size();
    for (double d : v) {
      const float f = static_cast<float>(d);
      std::uint8_t b[4];
      std::memcpy(b, &f, 4);
      blob->insert(blob->end(), b, b + 4);
    }
    return {{"offset", offset}, {"length", v.size()}};
  };
  json root;
  root["format_version"] = kFormatVersion;
  root["input_shape"] = file.model.input_shape.dims;
  if (file.p != 0) root["p"] = file.p;
  if (!file.model.activation_report.empty()) root["activation_report"] = file.model.activation_report;
  root["quantization"] = {{"input_scale", file.quant.input_scale},
                          {"weight_scale", file.quant.weight_scale},
                          {"activation_scale", file.quant.activation_scale},
                          {"min_weight_bits", file.quant.min_weight_bits}};
  if (blob) root["blob"] = blob_name;
  json layers = json::array();
  for (const FloatLayer& l : file.model.layers) {
    json j;
    j["type"] = nn::to_string(l.kind);
    json params = json::object();
    switch (l.kind) {
      case LayerKind::Conv2d:
        params = {{"out_ch", l.conv.out_ch}, {"in_ch", l.conv.in_ch}, {"kh", l.conv.kh},
                  {"kw", l.conv.kw},         {"stride", l.conv.stride}};
        j["weights"] = tensor(l.weights);
        j["bias"] = tensor(l.bias);
        break;
      case LayerKind::Dense:
        params = {{"out", l.dense.out}, {"in", l.dense.in}};
        j["weights"] = tensor(l.weights);
        j["bias"] = tensor(l.bias);
        break;
      case LayerKind::AvgPool:
        params = {{"window", l.window}};
        break;
      case LayerKind::PolyActivation:
        params = {{"coeffs", l.coeffs}};  // always inline: short and read by people
        break;
      case LayerKind::BatchNorm:
        params = {{"channels", l.channels}, {"eps", l.bn.eps}};
        j["gamma"] = tensor(l.bn.gamma);
        j["beta"] = tensor(l.bn.beta);
        j["mean"] = tensor(l.bn.mean);
        j["var"] = tensor(l.bn.var);
        break;
      case LayerKind::Flatten:
        break;
    }
    j["params"] = params;
    j["scale"] = l.scale > 0.0 ? json(l.scale) : json(nullptr);
    layers.push_back(std::move(j));
  }
  root["layers"] = std::move(layers);
  return root.dump(2);
}

void save_model_file(const ModelFile& file, const std::filesystem::path& path, bool use_blob) {
  nn::validate(file.model);
  std::vector<std::uint8_t> blob;
  std::filesystem::path blob_path = path;
  blob_path.replace_extension(".bin");
  const std::string manifest = model_manifest(file, blob_path.filename().string(), use_blob ? &blob : nullptr);
  {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << manifest << '\n';
  }
  if (use_blob) {
    std::ofstream out(blob_path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + blob_path.string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  }
}

nn::ModelSpec load_model(const std::filesystem::path& path, std::optional<std::uint64_t> p,
                         const nn::ModelLimits& limits) {
  return model_spec(load_model_file(path), p, limits);
}

nn::ModelSpec model_spec(const ModelFile& f, std::optional<std::uint64_t> p, const nn::ModelLimits& limits) {
  const std::uint64_t modulus = p.value_or(f.p);
  if (modulus == 0) throw ValidationError("no plaintext modulus: the model file has no \"p\" and none was given");
  nn::ModelSpec spec = quant::quantize_model(f.model, modulus, f.quant);
  nn::validate(spec, limits);
  return spec;
}

}  // namespace cdl::modelio
