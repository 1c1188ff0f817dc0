// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/app/session.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include "cdl/error.hpp"

namespace cdl::app {

namespace fs = std::filesystem;

namespace {

fs::path or_default(const fs::path& p, const fs::path& dir, const char* name) { return p.empty() ? dir / name : p; }

std::uint64_t parse_count(const std::string& key, const std::string& v, std::uint64_t max) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || out > max) {
    throw ValidationError("setting " + key + ": '" + v + "' is not a valid number");
  }
  return out;
}

bool known(const std::string& key) {
  return std::find_if(std::begin(kSessionKeys), std::end(kSessionKeys),
                      [&](const char* k) { return key == k; }) != std::end(kSessionKeys);
}

}  // namespace

fs::path SessionConfig::params_path() const { return or_default(params, keys_dir, "params.json"); }
fs::path SessionConfig::secret_key_path() const { return or_default(secret_key, keys_dir, "secret.key"); }
fs::path SessionConfig::public_key_path() const { return or_default(public_key, keys_dir, "public.key"); }
fs::path SessionConfig::relin_key_path() const { return or_default(relin_key, keys_dir, "relin.key"); }

void SessionConfig::check_batch(std::size_t slot_count) const {
  if (batch == 0) throw ValidationError("empty batch");
  if (batch > slot_count) {
    throw ValidationError("batch size " + std::to_string(batch) + " exceeds the slot count " +
                          std::to_string(slot_count));
  }
}

std::string env_name(const std::string& key) {
  std::string out = "CDL_";
  for (char c : key) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

Settings session_env(const std::function<const char*(const char*)>& getenv) {
  Settings out;
  for (const char* key : kSessionKeys) {
    const std::string name = env_name(key);
    const char* v = getenv ? getenv(name.c_str()) : std::getenv(name.c_str());
    if (v && *v) out[key] = v;
  }
  return out;
}

SessionConfig resolve_session(const Settings& flags, const Settings& env, const Settings& file) {
  Settings merged = file;
  for (const Settings* s : {&env, &flags}) {
    for (const auto& [k, v] : *s) merged[k] = v;
  }
  SessionConfig c;
  for (const auto& [k, v] : merged) {
    if (!known(k)) throw ValidationError("unknown setting '" + k + "'");
    if (k == "keys") c.keys_dir = v;
    else if (k == "params") c.params = v;
    else if (k == "secret-key") c.secret_key = v;
    else if (k == "public-key") c.public_key = v;
    else if (k == "relin-key") c.relin_key = v;
    else if (k == "model") c.model = v;
    else if (k == "batch") c.batch = parse_count(k, v, std::uint64_t{1} << 32);
    else if (k == "backend") c.backend = v;
    else if (k == "host") c.host = v;
    else if (k == "port") c.port = static_cast<std::uint16_t>(parse_count(k, v, 65535));
  }
  return c;
}

}  // namespace cdl::app
