// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

// cdl: command-line front end for the encrypted inference pipeline.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "cdl/app/batch_file.hpp"
#include "cdl/app/pipeline.hpp"
#include "cdl/app/session.hpp"
#include "cdl/approx/report.hpp"
#include "cdl/error.hpp"
#include "cdl/he/backend.hpp"
#include "cdl/modelio/fixtures.hpp"
#include "cdl/modelio/mnist.hpp"
#include "cdl/modelio/model_file.hpp"
#include "cdl/net/service.hpp"
#include "cdl/nn/engine.hpp"
#include "cdl/quantize/quantize.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cdl;
using nlohmann::json;

// ------------------------------------------------------------ settings

struct SessionFlags {
  std::string values[std::size(app::kSessionKeys)];
  CLI::Option* opts[std::size(app::kSessionKeys)] = {};
  std::string config;

  void add_to(CLI::App& cli) {
    static const char* help[] = {"directory holding params.json and the key files",
                                 "encryption parameters file",
                                 "secret key file",
                                 "public key file",
                                 "relinearization key file",
                                 "model manifest",
                                 "instances per batch (at most the slot count)",
                                 "simulator or rlwe",
                                 "server host",
                                 "server port"};
    for (std::size_t i = 0; i < std::size(app::kSessionKeys); ++i) {
      opts[i] = cli.add_option(std::string("--") + app::kSessionKeys[i], values[i], help[i]);
    }
    cli.add_option("--config", config, "settings file (TOML: key = value); also CDL_CONFIG");
  }

  app::SessionConfig resolve() const {
    app::Settings flags, file;
    for (std::size_t i = 0; i < std::size(app::kSessionKeys); ++i) {
      if (opts[i]->count() > 0) flags[app::kSessionKeys[i]] = values[i];
    }
    std::string path = config;
    if (path.empty()) {
      if (const char* e = std::getenv("CDL_CONFIG")) path = e;
    }
    if (!path.empty()) {
      std::ifstream in(path);
      if (!in) throw ValidationError("cannot open config file " + path);
      CLI::ConfigTOML toml;
      for (const CLI::ConfigItem& item : toml.from_config(in)) {
        if (!item.parents.empty() || item.inputs.empty()) continue;
        std::string key = item.name;
        for (char& c : key) c = c == '_' ? '-' : c;
        file[key] = item.inputs.front();
      }
    }
    return app::resolve_session(flags, app::session_env(), file);
  }
};

he::Bytes seed_bytes(const std::string& seed) {
  if (seed.empty()) {
    he::Bytes b(32);
    he::Prng::from_os_entropy().fill(b);
    return b;
  }
  return he::Bytes(seed.begin(), seed.end());
}

he::BackendKind backend_of(const app::SessionConfig& s) { return he::backend_from_string(s.backend); }

nn::ModelSpec model_for(const app::SessionConfig& s, std::optional<std::uint64_t> p) {
  if (s.model.empty()) throw ValidationError("no model given (--model or CDL_MODEL)");
  return modelio::load_model(s.model, p);
}

std::optional<std::uint64_t> opt_p(std::uint64_t p) { return p ? std::optional(p) : std::nullopt; }

void print_json(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream f(out);
    f << text << "\n";
    if (!f) throw ValidationError("cannot write " + out);
  }
}

modelio::Dataset load_dataset(const std::string& images, const std::string& labels, std::size_t offset,
                              std::size_t count) {
  modelio::Dataset d;
  d.images = modelio::read_idx_images(images);
  if (!labels.empty()) d.labels = modelio::read_idx_labels(labels);
  if (!labels.empty() && d.labels.size() != d.images.images.size()) {
    throw ValidationError("image and label files hold different counts");
  }
  const std::size_t n = d.images.images.size();
  if (offset > n) throw ValidationError("offset is past the end of the image file");
  const std::size_t take = std::min(count, n - offset);
  d.images.images = {d.images.images.begin() + offset, d.images.images.begin() + offset + take};
  if (!d.labels.empty()) d.labels = {d.labels.begin() + offset, d.labels.begin() + offset + take};
  if (take == 0) throw ValidationError("empty batch");
  return d;
}

// ------------------------------------------------------------ commands

struct FitArgs {
  std::string activation = "relu", method = "derivative", measure, interval = "-8,8", out;
  int degree = 3;
  double center = 0.0;
};

int cmd_fit(const FitArgs& a) {
  app::FitRequest r;
  r.activation = approx::activation_from_string(a.activation);
  r.method = approx::method_from_string(a.method);
  r.degree = a.degree;
  r.measure = a.measure;
  r.center = a.center;
  const auto comma = a.interval.find(',');
  try {
    r.interval = comma == std::string::npos
                     ? approx::Interval::symmetric(std::stod(a.interval))
                     : approx::Interval(std::stod(a.interval.substr(0, comma)), std::stod(a.interval.substr(comma + 1)));
  } catch (const std::logic_error&) {
    throw ValidationError("interval must be 'lo,hi' or 'l'");
  }
  const approx::ApproxReport rep = app::fit(r);
  if (a.out.empty()) {
    std::cout << approx::report_to_json(rep) << "\n";
  } else {
    approx::save_report(rep, a.out);
    std::printf("%s %s degree %d on [%g, %g]: sup_error %.6g, l2_error %.6g -> %s\n", a.activation.c_str(),
                approx::to_string(rep.method).c_str(), rep.poly.degree(), rep.interval.lo, rep.interval.hi,
                rep.sup_error, rep.l2_error, a.out.c_str());
  }
  return 0;
}

struct KeygenArgs {
  std::uint64_t p = 0;
  int L = 0;
  std::size_t slots = 0;
  std::string seed;
};

int cmd_keygen(const app::SessionConfig& s, const KeygenArgs& a) {
  const he::BackendKind kind = backend_of(s);
  const std::size_t slots = a.slots ? a.slots : (kind == he::BackendKind::Rlwe ? 4096 : 8192);
  he::HEParams params;
  if (!s.model.empty()) {
    params = nn::recommend_params(model_for(s, opt_p(a.p)), kind, slots);
  } else {
    const std::uint64_t p = a.p ? a.p : 65537;
    params = kind == he::BackendKind::Rlwe ? he::HEParams::rlwe(p, 6, slots) : he::HEParams::simulator(p, 6, slots);
  }
  if (a.L > 0) params.L = a.L;
  he::validate(params);
  const auto be = he::make_backend(params);
  const he::KeySet keys = be->keygen(seed_bytes(a.seed));
  fs::create_directories(s.keys_dir);
  he::save_params(params, s.params_path());
  he::save_key(keys.secret, s.secret_key_path());
  he::save_key(keys.pub, s.public_key_path());
  he::save_key(keys.relin, s.relin_key_path());
  std::printf("key %s: %s p=%llu L=%d slots=%zu -> %s\n", he::key_id_hex(keys.pub.key_id).c_str(),
              he::to_string(params.backend).c_str(), static_cast<unsigned long long>(params.p), params.L,
              params.slot_count, s.keys_dir.c_str());
  return 0;
}

struct EncryptArgs {
  std::string images, out, seed;
  std::size_t offset = 0;
  std::optional<std::size_t> count;
};

int cmd_encrypt(const app::SessionConfig& s, const EncryptArgs& a) {
  const he::HEParams params = he::load_params(s.params_path());
  const auto be = he::make_backend(params);
  const nn::ModelSpec m = model_for(s, params.p);
  app::SessionConfig sized = s;
  if (a.count) sized.batch = *a.count;
  sized.check_batch(params.slot_count);
  const modelio::Dataset d = load_dataset(a.images, "", a.offset, sized.batch);
  he::Prng rng = a.seed.empty() ? he::Prng::from_os_entropy() : he::Prng(seed_bytes(a.seed), "encrypt");
  const app::CipherBatch b =
      app::encrypt_batch(*be, he::load_public_key(s.public_key_path()), m, modelio::to_instances(d.images, m), rng);
  app::save_batch(b, a.out);
  std::printf("encrypted %zu instances into %zu ciphertexts -> %s\n", b.count, b.cts.size(), a.out.c_str());
  return 0;
}

void print_timings(const std::vector<nn::LayerTiming>& t) {
  for (const nn::LayerTiming& l : t) std::printf("  %-40s %-14s %9.3f s\n", l.layer.c_str(), l.output.str().c_str(), l.seconds);
}

struct InferArgs {
  std::string in, out;
  bool timings = false;
};

int cmd_infer(const app::SessionConfig& s, const InferArgs& a) {
  const he::HEParams params = he::load_params(s.params_path());
  const auto be = he::make_backend(params);
  const nn::ModelSpec m = model_for(s, params.p);
  const app::CipherBatch in = app::load_batch(a.in, *be);
  std::vector<nn::LayerTiming> t;
  const app::CipherBatch out = app::infer_batch(*be, he::load_relin_key(s.relin_key_path()), m, in, &t);
  app::save_batch(out, a.out);
  std::printf("inferred %zu instances, %zu logit ciphertexts -> %s\n", out.count, out.cts.size(), a.out.c_str());
  if (a.timings) print_timings(t);
  return 0;
}

struct DecryptArgs {
  std::string in, out, labels;
};

int cmd_decrypt(const app::SessionConfig& s, const DecryptArgs& a) {
  const he::HEParams params = he::load_params(s.params_path());
  const auto be = he::make_backend(params);
  const app::CipherBatch res = app::load_batch(a.in, *be);
  const std::vector<app::Slots> logits = app::decrypt_batch(*be, he::load_secret_key(s.secret_key_path()), res);
  json preds = json::array(), values = json::array();
  std::vector<std::size_t> cls;
  for (const app::Slots& l : logits) {
    cls.push_back(nn::predict(l, params.p));
    preds.push_back(cls.back());
    json row = json::array();
    for (std::uint64_t v : l) row.push_back(quant::to_signed(v, params.p));
    values.push_back(row);
  }
  json doc = {{"predictions", preds}, {"logits", values}};
  if (!a.labels.empty()) {
    const auto labels = modelio::read_idx_labels(a.labels);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < cls.size() && i < labels.size(); ++i) hit += cls[i] == labels[i];
    doc["correct"] = hit;
  }
  if (a.out.empty()) {
    for (std::size_t c : cls) std::printf("%zu\n", c);
  } else {
    print_json(doc.dump(2), a.out);
    std::printf("decrypted %zu predictions -> %s\n", cls.size(), a.out.c_str());
  }
  return 0;
}

struct E2EArgs {
  std::string images, labels, seed = "e2e", out;
  std::size_t offset = 0, count = 64, slots = 0;
  std::uint64_t p = 0;
};

int cmd_run_e2e(const app::SessionConfig& s, const E2EArgs& a) {
  const he::BackendKind kind = backend_of(s);
  const modelio::ModelFile file = modelio::load_model_file(s.model);
  const nn::ModelSpec m = model_for(s, opt_p(a.p));
  modelio::Dataset d;
  if (a.images.empty()) {
    d = modelio::gen_images(1, a.count, m.input_shape.dims.at(1), m.input_shape.dims.at(2));
  } else {
    d = load_dataset(a.images, a.labels, a.offset, a.count);
  }
  const std::size_t slots = a.slots ? a.slots : (kind == he::BackendKind::Rlwe ? 4096 : d.images.images.size());
  const he::HEParams params = nn::recommend_params(m, kind, slots);
  const auto be = he::make_backend(params);
  const he::Bytes seed = seed_bytes(a.seed);
  const he::KeySet keys = be->keygen(seed);
  he::Prng rng(seed, "e2e");
  const app::E2EReport r = app::run_e2e(*be, keys, file, m, d, rng);
  if (!a.out.empty()) print_json(r.to_json(), a.out);
  std::printf("%s L=%d slots=%zu: %zu instances, encrypted vs plaintext logits %zu/%zu equal, float argmax agreement "
              "%zu/%zu",
              he::to_string(kind).c_str(), params.L, params.slot_count, r.instances, r.logits - r.logit_mismatches,
              r.logits, r.float_agreement, r.instances);
  if (r.has_labels) std::printf(", label accuracy %zu/%zu", r.label_agreement, r.instances);
  std::printf("\n");
  return r.exact() ? 0 : 1;
}

struct BenchArgs {
  std::string images, out;
  std::size_t slots = 0;
  std::uint64_t p = 0;
};

int cmd_bench(const app::SessionConfig& s, const BenchArgs& a) {
  const he::BackendKind kind = backend_of(s);
  const nn::ModelSpec m = model_for(s, opt_p(a.p));
  const modelio::Dataset d = a.images.empty()
                                 ? modelio::gen_images(7, 256, m.input_shape.dims.at(1), m.input_shape.dims.at(2))
                                 : load_dataset(a.images, "", 0, s.batch);
  const std::size_t slots = a.slots ? a.slots : (kind == he::BackendKind::Rlwe ? 8192 : s.batch);
  const he::HEParams params = nn::recommend_params(m, kind, slots);
  s.check_batch(params.slot_count);
  const app::BenchReport r = app::bench(params, m, d, s.batch, 1);
  std::cout << r.to_table();
  if (!a.out.empty()) print_json(r.to_json(), a.out);
  return 0;
}

struct ServeArgs {
  std::size_t max_connections = 0;
  std::uint64_t p = 0;
};

int cmd_serve(const app::SessionConfig& s, const ServeArgs& a) {
  const nn::ModelSpec m = model_for(s, opt_p(a.p));
  net::ServerConfig cfg;
  cfg.host = s.host;
  cfg.port = s.port;
  net::Server server(m, cfg);
  std::printf("listening on %s:%u\n", s.host.c_str(), server.port());
  std::fflush(stdout);
  server.run(a.max_connections);
  return 0;
}

struct SendArgs {
  std::string in, out;
};

int cmd_send(const app::SessionConfig& s, const SendArgs& a) {
  const he::HEParams params = he::load_params(s.params_path());
  const auto be = he::make_backend(params);
  const app::CipherBatch in = app::load_batch(a.in, *be);
  const app::CipherBatch out = net::send_job(s.host, s.port, *be, he::load_public_key(s.public_key_path()),
                                             he::load_relin_key(s.relin_key_path()), in);
  app::save_batch(out, a.out);
  std::printf("received %zu logit ciphertexts -> %s\n", out.cts.size(), a.out.c_str());
  return 0;
}

struct CapacityArgs {
  std::uint64_t p = 0;
  double lo = 0.0, hi = 255.0;
  std::string out;
};

int cmd_capacity(const app::SessionConfig& s, const CapacityArgs& a) {
  const quant::CapacityReport r = quant::capacity_check(model_for(s, opt_p(a.p)), a.lo, a.hi);
  print_json(r.to_json(), a.out);
  if (!a.out.empty()) std::printf("capacity %s\n", r.pass ? "PASS" : "FAIL");
  return r.pass ? 0 : 3;
}

struct DepthArgs {
  std::uint64_t p = 0;
  std::string out;
};

int cmd_depth(const app::SessionConfig& s, const DepthArgs& a) {
  print_json(nn::depth_report(model_for(s, opt_p(a.p))).to_json(), a.out);
  return 0;
}

struct FixtureArgs {
  std::string kind = "model1", out = "model.json", images, labels;
  std::uint64_t seed = 1;
  std::size_t count = 64;
  bool inline_weights = false;
};

int cmd_gen_fixture(const FixtureArgs& a) {
  modelio::ModelFile f;
  if (a.kind == "model1") f = modelio::gen_model1(a.seed);
  else if (a.kind == "fixture") f = modelio::gen_fixture_model(a.seed);
  else if (a.kind == "model1-reduced") f = modelio::gen_model1_reduced(a.seed);
  else throw ValidationError("unknown fixture kind " + a.kind);
  modelio::save_model_file(f, a.out, !a.inline_weights);
  std::printf("%s (%zu layers, input %s) -> %s\n", a.kind.c_str(), f.model.layers.size(),
              f.model.input_shape.str().c_str(), a.out.c_str());
  if (!a.images.empty()) {
    const auto& dims = f.model.input_shape.dims;
    const modelio::Dataset d = modelio::gen_images(a.seed, a.count, dims.at(1), dims.at(2));
    modelio::write_idx_images(a.images, d.images);
    if (!a.labels.empty()) modelio::write_idx_labels(a.labels, d.labels);
    std::printf("%zu images -> %s\n", a.count, a.images.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Encrypted CNN inference with polynomial activations"};
  cli.require_subcommand(1);
  cli.fallthrough();
  SessionFlags session;
  session.add_to(cli);

  FitArgs fit;
  auto* c_fit = cli.add_subcommand("fit", "fit a polynomial replacement for an activation");
  c_fit->add_option("--activation", fit.activation, "relu, sigmoid or tanh")->capture_default_str();
  c_fit->add_option("--method", fit.method, "point_fit, taylor, chebyshev, chebyshev_modified, derivative, projection")
      ->capture_default_str();
  c_fit->add_option("--degree", fit.degree)->capture_default_str();
  c_fit->add_option("--interval", fit.interval, "lo,hi or l for [-l, l]")->capture_default_str();
  c_fit->add_option("--measure", fit.measure, "lebesgue, chebyshev, gaussian_tail or modified_relu");
  c_fit->add_option("--center", fit.center, "Taylor expansion point")->capture_default_str();
  c_fit->add_option("-o,--out", fit.out, "report file (stdout when omitted)");

  KeygenArgs kg;
  auto* c_keygen = cli.add_subcommand("keygen", "create parameters and a key set");
  c_keygen->add_option("--p", kg.p, "plaintext modulus (default: the model's, else 65537)");
  c_keygen->add_option("--L", kg.L, "multiplicative levels (default: from the model depth, else 6)");
  c_keygen->add_option("--slots", kg.slots, "slot count (ring degree for rlwe)");
  c_keygen->add_option("--seed", kg.seed, "deterministic key seed");

  EncryptArgs enc;
  auto* c_encrypt = cli.add_subcommand("encrypt", "encrypt IDX images into a ciphertext batch");
  c_encrypt->add_option("--images", enc.images, "IDX image file")->required();
  c_encrypt->add_option("--offset", enc.offset);
  c_encrypt->add_option("--count", enc.count, "instances (default: the batch size)");
  c_encrypt->add_option("--seed", enc.seed, "deterministic encryption randomness");
  c_encrypt->add_option("-o,--out", enc.out)->required();

  InferArgs inf;
  auto* c_infer = cli.add_subcommand("infer", "evaluate the model on an encrypted batch");
  c_infer->add_option("-i,--in", inf.in)->required();
  c_infer->add_option("-o,--out", inf.out)->required();
  c_infer->add_flag("--timings", inf.timings, "print per-layer timings");

  DecryptArgs dec;
  auto* c_decrypt = cli.add_subcommand("decrypt", "decrypt result logits and print predictions");
  c_decrypt->add_option("-i,--in", dec.in)->required();
  c_decrypt->add_option("-o,--out", dec.out, "JSON with predictions and signed logits");
  c_decrypt->add_option("--labels", dec.labels, "IDX labels to score against");

  E2EArgs e2e;
  auto* c_e2e = cli.add_subcommand("run-e2e", "encrypt, infer, decrypt and compare with both oracles");
  c_e2e->add_option("--images", e2e.images, "IDX images (synthetic when omitted)");
  c_e2e->add_option("--labels", e2e.labels);
  c_e2e->add_option("--offset", e2e.offset);
  c_e2e->add_option("--count", e2e.count)->capture_default_str();
  c_e2e->add_option("--slots", e2e.slots);
  c_e2e->add_option("--p", e2e.p);
  c_e2e->add_option("--seed", e2e.seed)->capture_default_str();
  c_e2e->add_option("-o,--out", e2e.out, "JSON report");

  BenchArgs bn;
  auto* c_bench = cli.add_subcommand("bench", "time one encrypted batch per layer and count bytes");
  c_bench->add_option("--images", bn.images, "IDX images (synthetic when omitted)");
  c_bench->add_option("--slots", bn.slots);
  c_bench->add_option("--p", bn.p);
  c_bench->add_option("-o,--out", bn.out, "JSON report");

  ServeArgs sv;
  auto* c_serve = cli.add_subcommand("serve", "answer inference jobs over TCP");
  c_serve->add_option("--max-connections", sv.max_connections, "exit after this many jobs (0 = never)");
  c_serve->add_option("--p", sv.p);

  SendArgs sd;
  auto* c_send = cli.add_subcommand("send", "submit a batch to a server and store the results");
  c_send->add_option("-i,--in", sd.in)->required();
  c_send->add_option("-o,--out", sd.out)->required();

  CapacityArgs cp;
  auto* c_capacity = cli.add_subcommand("capacity", "check that every integer stays below p/2");
  c_capacity->add_option("--p", cp.p);
  c_capacity->add_option("--lo", cp.lo, "smallest input value")->capture_default_str();
  c_capacity->add_option("--hi", cp.hi, "largest input value")->capture_default_str();
  c_capacity->add_option("-o,--out", cp.out);

  DepthArgs dp;
  auto* c_depth = cli.add_subcommand("depth", "report multiplicative depth per layer");
  c_depth->add_option("--p", dp.p);
  c_depth->add_option("-o,--out", dp.out);

  FixtureArgs fx;
  auto* c_fixture = cli.add_subcommand("gen-fixture", "write a deterministic model and synthetic images");
  c_fixture->add_option("--kind", fx.kind, "model1, model1-reduced or fixture")->capture_default_str();
  c_fixture->add_option("--seed", fx.seed)->capture_default_str();
  c_fixture->add_option("-o,--out", fx.out)->capture_default_str();
  c_fixture->add_option("--images", fx.images, "also write IDX images here");
  c_fixture->add_option("--labels", fx.labels, "and their labels here");
  c_fixture->add_option("--count", fx.count)->capture_default_str();
  c_fixture->add_flag("--inline", fx.inline_weights, "store weights in the manifest instead of a blob");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (c_fit->parsed()) return cmd_fit(fit);
    if (c_fixture->parsed()) return cmd_gen_fixture(fx);
    const app::SessionConfig s = session.resolve();
    if (c_keygen->parsed()) return cmd_keygen(s, kg);
    if (c_encrypt->parsed()) return cmd_encrypt(s, enc);
    if (c_infer->parsed()) return cmd_infer(s, inf);
    if (c_decrypt->parsed()) return cmd_decrypt(s, dec);
    if (c_e2e->parsed()) return cmd_run_e2e(s, e2e);
    if (c_bench->parsed()) return cmd_bench(s, bn);
    if (c_serve->parsed()) return cmd_serve(s, sv);
    if (c_send->parsed()) return cmd_send(s, sd);
    if (c_capacity->parsed()) return cmd_capacity(s, cp);
    if (c_depth->parsed()) return cmd_depth(s, dp);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cdl: %s\n", e.what());
    return exit_code_of(e);
  }
  return 2;
}
