// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>

namespace cdl::app {

// Settings shared by the pipeline commands. Key files default to fixed
// names inside `keys_dir`.
struct SessionConfig {
  std::filesystem::path keys_dir = ".";
  std::filesystem::path params;      // default keys_dir/params.json
  std::filesystem::path secret_key;  // default keys_dir/secret.key
  std::filesystem::path public_key;  // default keys_dir/public.key
  std::filesystem::path relin_key;   // default keys_dir/relin.key
  std::filesystem::path model;
  std::size_t batch = 8192;
  std::string backend = "simulator";
  std::string host = "127.0.0.1";
  std::uint16_t port = 7878;

  std::filesystem::path params_path() const;
  std::filesystem::path secret_key_path() const;
  std::filesystem::path public_key_path() const;
  std::filesystem::path relin_key_path() const;

  // Throws ValidationError unless 1 <= batch <= slot_count.
  void check_batch(std::size_t slot_count) const;
};

using Settings = std::map<std::string, std::string>;

// Setting names, as used for flags (--name), config-file keys and, upper
// cased with '-' turned into '_' and prefixed with CDL_, environment
// variables.
inline constexpr const char* kSessionKeys[] = {"keys",  "params",  "secret-key", "public-key", "relin-key",
                                               "model", "batch",   "backend",    "host",       "port"};

std::string env_name(const std::string& key);

// Reads the CDL_* variables through `getenv` (std::getenv by default).
Settings session_env(const std::function<const char*(const char*)>& getenv = {});

// Later sources lose: flags, then environment, then the config file.
// Unknown keys and malformed numbers raise ValidationError.
SessionConfig resolve_session(const Settings& flags, const Settings& env, const Settings& file);

}  // namespace cdl::app
