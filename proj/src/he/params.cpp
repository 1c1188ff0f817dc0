// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/he/params.hpp"

#include <bit>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cdl/error.hpp"
#include "cdl/he/modarith.hpp"

namespace cdl::he {

using nlohmann::json;

std::string to_string(BackendKind b) { return b == BackendKind::Rlwe ? "rlwe" : "simulator"; }

BackendKind backend_from_string(const std::string& s) {
  if (s == "simulator" || s == "sim") return BackendKind::Simulator;
  if (s == "rlwe") return BackendKind::Rlwe;
  throw ValidationError("unknown backend: " + s);
}

HEParams HEParams::simulator(std::uint64_t p, int L, std::size_t slots) {
  HEParams h;
  h.backend = BackendKind::Simulator;
  h.p = p;
  h.L = L;
  h.slot_count = slots;
  return h;
}

HEParams HEParams::rlwe(std::uint64_t p, int L, std::size_t n) {
  HEParams h;
  h.backend = BackendKind::Rlwe;
  h.p = p;
  h.L = L;
  h.n = n;
  h.slot_count = n;
  return h;
}

void validate(const HEParams& h) {
  if (h.p < 3 || h.p >= (std::uint64_t{1} << 61)) throw ValidationError("plaintext modulus must lie in [3, 2^61)");
  if (!is_prime(h.p)) throw ValidationError("plaintext modulus " + std::to_string(h.p) + " is not prime");
  if (h.L < 1) throw ValidationError("L must be >= 1");
  if (h.slot_count < 1) throw ValidationError("slot_count must be >= 1");
  if (h.backend == BackendKind::Rlwe) {
    if (h.n < 2 || !std::has_single_bit(h.n)) throw ValidationError("ring degree must be a power of two");
    if (h.n > 32768) throw ValidationError("ring degree above 32768 is not supported");
    if ((h.p - 1) % (2 * h.n) != 0) {
      throw ValidationError("p = " + std::to_string(h.p) + " is not 1 mod 2n = " + std::to_string(2 * h.n) +
                            "; slot batching needs it");
    }
    if (h.slot_count != h.n) throw ValidationError("Rlwe slot_count must equal n");
    if (h.q_count < 0 || h.q_count > 40) throw ValidationError("q_count must lie in [0, 40]");
    if (h.plain_mults < 0) throw ValidationError("plain_mults must be >= 0");
    if (h.p >= (std::uint64_t{1} << 59)) throw ValidationError("Rlwe plaintext modulus must be below 2^59");
  } else {
    const NoiseModel& m = h.noise;
    if (!(m.fresh_per_level > 0.0)) throw ValidationError("fresh budget per level must be positive");
    for (double c : {m.add, m.add_plain, m.mul_plain, m.mul, m.rotate}) {
      if (c < 0.0) throw ValidationError("noise costs must be non-negative");
    }
  }
}

std::string params_to_json(const HEParams& h, int indent) {
  json j;
  j["backend"] = to_string(h.backend);
  j["p"] = h.p;
  j["L"] = h.L;
  j["k"] = h.k;
  j["slot_count"] = h.slot_count;
  if (h.backend == BackendKind::Rlwe) {
    j["n"] = h.n;
    j["q_count"] = h.q_count;
    j["plain_mults"] = h.plain_mults;
  } else {
    j["noise"] = {{"fresh_per_level", h.noise.fresh_per_level}, {"add", h.noise.add},
                  {"add_plain", h.noise.add_plain},             {"mul_plain", h.noise.mul_plain},
                  {"mul", h.noise.mul},                         {"rotate", h.noise.rotate}};
  }
  return j.dump(indent);
}

HEParams params_from_json(const std::string& text) {
  HEParams h;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ValidationError("params must be a JSON object");
    h.backend = backend_from_string(j.at("backend").get<std::string>());
    h.p = j.at("p").get<std::uint64_t>();
    h.L = j.at("L").get<int>();
    h.k = j.value("k", 80);
    if (h.backend == BackendKind::Rlwe) {
      h.n = j.at("n").get<std::size_t>();
      h.slot_count = j.value("slot_count", h.n);
      h.q_count = j.value("q_count", 0);
      h.plain_mults = j.value("plain_mults", 3);
    } else {
      h.slot_count = j.value("slot_count", std::size_t{8192});
      if (j.contains("noise")) {
        const json& nm = j["noise"];
        h.noise.fresh_per_level = nm.value("fresh_per_level", h.noise.fresh_per_level);
        h.noise.add = nm.value("add", h.noise.add);
        h.noise.add_plain = nm.value("add_plain", h.noise.add_plain);
        h.noise.mul_plain = nm.value("mul_plain", h.noise.mul_plain);
        h.noise.mul = nm.value("mul", h.noise.mul);
        h.noise.rotate = nm.value("rotate", h.noise.rotate);
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed params: ") + e.what());
  }
  validate(h);
  return h;
}

void save_params(const HEParams& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << params_to_json(params) << '\n';
}

HEParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return params_from_json(ss.str());
}

std::uint64_t wide_plaintext_prime() {
  static const std::uint64_t p = next_prime_congruent_one(std::uint64_t{1} << 48, 16384);
  return p;
}

}  // namespace cdl::he
