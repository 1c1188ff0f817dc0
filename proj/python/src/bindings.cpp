// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "cdl/app/batch_file.hpp"
#include "cdl/app/pipeline.hpp"
#include "cdl/approx/report.hpp"
#include "cdl/error.hpp"
#include "cdl/he/backend.hpp"
#include "cdl/modelio/fixtures.hpp"
#include "cdl/modelio/mnist.hpp"
#include "cdl/modelio/model_file.hpp"
#include "cdl/net/service.hpp"
#include "cdl/nn/engine.hpp"
#include "cdl/nn/float_forward.hpp"
#include "cdl/quantize/quantize.hpp"

namespace py = pybind11;
using namespace cdl;

namespace {

using U64Array = py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::object json_to_py(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

he::Bytes to_bytes(const py::bytes& b) {
  const std::string s = b;
  return he::Bytes(s.begin(), s.end());
}

py::bytes from_bytes(const he::Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

he::Slots to_slots(const U64Array& a) { return he::Slots(a.data(), a.data() + a.size()); }

template <class T>
py::array_t<T> vector_to_array(const std::vector<T>& v) {
  py::array_t<T> out({static_cast<py::ssize_t>(v.size())}, {static_cast<py::ssize_t>(sizeof(T))});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::array_t<std::uint64_t> to_array(const he::Slots& v) { return vector_to_array(v); }

U64Array to_matrix(const std::vector<he::Slots>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  U64Array out({rows.size(), cols});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  }
  return out;
}

std::vector<he::Slots> from_matrix(const U64Array& a) {
  if (a.ndim() != 2) throw ValidationError("expected a 2-D array of instances");
  auto m = a.unchecked<2>();
  std::vector<he::Slots> out(m.shape(0), he::Slots(m.shape(1)));
  for (py::ssize_t i = 0; i < m.shape(0); ++i) {
    for (py::ssize_t j = 0; j < m.shape(1); ++j) out[i][j] = m(i, j);
  }
  return out;
}

modelio::IdxImages to_images(const U8Array& a) {
  if (a.ndim() != 3) throw ValidationError("expected images shaped (count, rows, cols)");
  modelio::IdxImages im;
  im.rows = a.shape(1);
  im.cols = a.shape(2);
  const std::size_t px = im.rows * im.cols;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) im.images.emplace_back(a.data() + i * px, a.data() + (i + 1) * px);
  return im;
}

U8Array from_images(const modelio::IdxImages& im) {
  U8Array out({im.images.size(), im.rows, im.cols});
  std::uint8_t* dst = out.mutable_data();
  for (const auto& img : im.images) dst = std::copy(img.begin(), img.end(), dst);
  return out;
}

modelio::Dataset to_dataset(const U8Array& images, const std::optional<U8Array>& labels) {
  modelio::Dataset d;
  d.images = to_images(images);
  if (labels) d.labels.assign(labels->data(), labels->data() + labels->size());
  return d;
}

// Runs a server on a background thread for the lifetime of the object.
class BackgroundServer {
 public:
  BackgroundServer(nn::ModelSpec m, const std::string& host, std::uint16_t port, double io_timeout)
      : model_(std::move(m)) {
    net::ServerConfig cfg;
    cfg.host = host;
    cfg.port = port;
    cfg.io_timeout = std::chrono::milliseconds(static_cast<long long>(io_timeout * 1000.0));
    server_ = std::make_unique<net::Server>(model_, cfg);
    thread_ = std::thread([this] { server_->run(); });
  }
  ~BackgroundServer() { stop(); }

  std::uint16_t port() const { return server_->port(); }
  std::size_t handled() const { return server_->handled(); }
  void stop() {
    if (!thread_.joinable()) return;
    server_->stop();
    thread_.join();
  }

 private:
  nn::ModelSpec model_;
  std::unique_ptr<net::Server> server_;
  std::thread thread_;
};

}  // namespace

PYBIND11_MODULE(_cdl, m) {
  m.doc() = "Polynomial-activation CNN inference over homomorphically encrypted batches.";

  // ---------------------------------------------------------- errors
  // Registered base first: later registrations are tried first, so the most
  // derived class wins.
  auto& base = py::register_exception<Error>(m, "CdlError", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  auto& capacity = py::register_exception<CapacityError>(m, "CapacityError", base.ptr());
  py::register_exception<LevelExhausted>(m, "LevelExhausted", capacity.ptr());
  py::register_exception<NoiseExhausted>(m, "NoiseExhausted", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());
  py::register_exception<DegenerateBasis>(m, "DegenerateBasis", base.ptr());

  // ---------------------------------------------------------- approximation
  m.def(
      "fit",
      [](const std::string& activation, const std::string& method, int degree, std::pair<double, double> interval,
         const std::string& measure, double center, std::size_t samples) {
        app::FitRequest req;
        req.activation = approx::activation_from_string(activation);
        req.method = approx::method_from_string(method);
        req.degree = degree;
        req.interval = approx::Interval(interval.first, interval.second);
        req.measure = measure;
        req.center = center;
        req.samples = samples;
        return json_to_py(approx::report_to_json(app::fit(req)));
      },
      py::arg("activation") = "relu", py::arg("method") = "derivative", py::arg("degree") = 3,
      py::arg("interval") = std::pair<double, double>{-8.0, 8.0}, py::arg("measure") = "", py::arg("center") = 0.0,
      py::arg("samples") = 1001,
      "Polynomial replacement for an activation; returns the report as a dict.");

  // ---------------------------------------------------------- encryption
  py::class_<he::HEParams>(m, "Params")
      .def_static("simulator", &he::HEParams::simulator, py::arg("p"), py::arg("L"), py::arg("slots") = 8192)
      .def_static("rlwe", &he::HEParams::rlwe, py::arg("p"), py::arg("L"), py::arg("n") = 4096)
      .def_static("from_json", &he::params_from_json)
      .def("to_json", [](const he::HEParams& p) { return he::params_to_json(p); })
      .def_property_readonly("backend", [](const he::HEParams& p) { return he::to_string(p.backend); })
      .def_readonly("p", &he::HEParams::p)
      .def_readonly("L", &he::HEParams::L)
      .def_readonly("n", &he::HEParams::n)
      .def_readonly("slot_count", &he::HEParams::slot_count)
      .def("__eq__", [](const he::HEParams& a, const he::HEParams& b) { return a == b; })
      .def("__repr__", [](const he::HEParams& p) {
        return "Params(" + he::to_string(p.backend) + ", p=" + std::to_string(p.p) + ", L=" + std::to_string(p.L) +
               ", slots=" + std::to_string(p.slot_count) + ")";
      });
  m.def("wide_plaintext_prime", &he::wide_plaintext_prime);

  const auto key_class = [&m](const char* name, auto tag) {
    using K = decltype(tag);
    py::class_<K>(m, name)
        .def_property_readonly("key_id", [](const K& k) { return he::key_id_hex(k.key_id); })
        .def("to_bytes", [](const K& k) { return from_bytes(he::serialize_key(k)); });
  };
  key_class("SecretKey", he::SecretKey{});
  key_class("PublicKey", he::PublicKey{});
  key_class("RelinKey", he::RelinKey{});
  m.def("secret_key_from_bytes",
        [](const py::bytes& b) { return he::key_as<he::SecretKey>(he::deserialize_key(to_bytes(b)), he::KeyKind::Secret); });
  m.def("public_key_from_bytes",
        [](const py::bytes& b) { return he::key_as<he::PublicKey>(he::deserialize_key(to_bytes(b)), he::KeyKind::Public); });
  m.def("relin_key_from_bytes",
        [](const py::bytes& b) { return he::key_as<he::RelinKey>(he::deserialize_key(to_bytes(b)), he::KeyKind::Relin); });

  py::class_<he::KeySet>(m, "KeySet")
      .def_readonly("secret", &he::KeySet::secret)
      .def_readonly("public", &he::KeySet::pub)
      .def_readonly("relin", &he::KeySet::relin);

  py::class_<he::Ciphertext>(m, "Ciphertext")
      .def_readonly("level", &he::Ciphertext::level)
      .def_readonly("noise_budget", &he::Ciphertext::noise_budget)
      .def("to_bytes", [](const he::Ciphertext& c) { return from_bytes(he::serialize_ct(c)); });

  py::class_<he::Backend, std::shared_ptr<he::Backend>>(m, "Backend")
      .def(py::init([](const he::HEParams& p) { return std::shared_ptr<he::Backend>(he::make_backend(p)); }))
      .def_property_readonly("params", &he::Backend::params)
      .def_property_readonly("slot_count", &he::Backend::slot_count)
      .def_property_readonly("p", &he::Backend::p)
      .def(
          "keygen", [](const he::Backend& be, const py::bytes& seed) { return be.keygen(to_bytes(seed)); },
          py::arg("seed"), py::call_guard<py::gil_scoped_release>())
      .def(
          "encrypt",
          [](const he::Backend& be, const he::PublicKey& pk, const U64Array& slots, std::optional<py::bytes> seed) {
            const he::Slots v = to_slots(slots);
            if (!seed) return be.encrypt(pk, v);
            he::Prng rng(to_bytes(*seed), "python-encrypt");
            return be.encrypt(pk, v, rng);
          },
          py::arg("pk"), py::arg("slots"), py::arg("seed") = py::none())
      .def("decrypt", [](const he::Backend& be, const he::SecretKey& sk,
                         const he::Ciphertext& c) { return to_array(be.decrypt(sk, c)); })
      .def("measure_noise_budget", &he::Backend::measure_noise_budget)
      .def("add", &he::Backend::add)
      .def("mul", &he::Backend::mul, py::call_guard<py::gil_scoped_release>())
      .def("add_plain",
           [](const he::Backend& be, const he::Ciphertext& c, const U64Array& v) { return be.add_plain(c, to_slots(v)); })
      .def("mul_plain",
           [](const he::Backend& be, const he::Ciphertext& c, const U64Array& v) { return be.mul_plain(c, to_slots(v)); })
      .def("add_scalar", &he::Backend::add_scalar)
      .def("mul_scalar", &he::Backend::mul_scalar)
      .def("rotate", &he::Backend::rotate)
      .def("eval_poly",
           [](const he::Backend& be, const he::Ciphertext& c, const std::vector<std::uint64_t>& coeffs,
              const he::RelinKey& rk) { return be.eval_poly(c, coeffs, rk); })
      .def("deserialize", [](const he::Backend& be, const py::bytes& b) { return be.deserialize(to_bytes(b)); });

  // ---------------------------------------------------------- models
  py::class_<modelio::ModelFile>(m, "ModelFile")
      .def_readonly("p", &modelio::ModelFile::p)
      .def_property_readonly("input_shape", [](const modelio::ModelFile& f) { return f.model.input_shape.dims; })
      .def_property_readonly("layer_count", [](const modelio::ModelFile& f) { return f.model.layers.size(); })
      .def("manifest", [](const modelio::ModelFile& f) { return json_to_py(modelio::model_manifest(f, "", nullptr)); })
      .def(
          "save", [](const modelio::ModelFile& f, const std::filesystem::path& path,
                     bool blob) { modelio::save_model_file(f, path, blob); },
          py::arg("path"), py::arg("blob") = true)
      .def(
          "float_forward",
          [](const modelio::ModelFile& f, const F64Array& x, bool folded) {
            const nn::FloatModel model = folded ? quant::fold_batchnorms(f.model) : f.model;
            std::vector<std::vector<double>> trace;
            const auto out = nn::float_forward(model, std::span<const double>(x.data(), x.size()), &trace);
            return py::make_tuple(out, trace);
          },
          py::arg("x"), py::arg("folded") = true,
          "Real-valued forward pass; returns (output, per-layer trace).");
  m.def("load_model_file", &modelio::load_model_file, py::arg("path"));
  m.def("parse_model_file", &modelio::parse_model_file, py::arg("manifest"), py::arg("base_dir") = ".");
  m.def("gen_fixture_model", &modelio::gen_fixture_model, py::arg("seed") = 1);
  m.def("gen_model1", &modelio::gen_model1, py::arg("seed") = 1);
  m.def("gen_model1_reduced", &modelio::gen_model1_reduced, py::arg("seed") = 1);

  py::class_<nn::ModelSpec>(m, "ModelSpec")
      .def_readonly("p", &nn::ModelSpec::p)
      .def_readonly("classes", &nn::ModelSpec::classes)
      .def_readonly("input_scale", &nn::ModelSpec::input_scale)
      .def_property_readonly("input_shape", [](const nn::ModelSpec& s) { return s.input_shape.dims; })
      .def_property_readonly("layer_count", [](const nn::ModelSpec& s) { return s.layers.size(); })
      .def_property_readonly("output_scale", [](const nn::ModelSpec& s) { return static_cast<double>(s.output_scale()); })
      .def_property_readonly("layers", [](const nn::ModelSpec& s) {
        std::vector<std::string> names;
        for (const auto& l : s.layers) names.push_back(nn::describe(l));
        return names;
      });
  m.def(
      "model_spec",
      [](const modelio::ModelFile& f, std::optional<std::uint64_t> p) { return modelio::model_spec(f, p); },
      py::arg("file"), py::arg("p") = py::none(), "Fold batch norms and quantize.");
  m.def(
      "load_model",
      [](const std::filesystem::path& path, std::optional<std::uint64_t> p) { return modelio::load_model(path, p); },
      py::arg("path"), py::arg("p") = py::none());
  m.def(
      "capacity_check",
      [](const nn::ModelSpec& s, double lo, double hi) { return json_to_py(quant::capacity_check(s, lo, hi).to_json()); },
      py::arg("spec"), py::arg("lo") = 0.0, py::arg("hi") = 255.0);
  m.def("depth_report", [](const nn::ModelSpec& s) { return json_to_py(nn::depth_report(s).to_json()); });
  m.def(
      "recommend_params",
      [](const nn::ModelSpec& s, const std::string& backend, std::size_t slots) {
        return nn::recommend_params(s, he::backend_from_string(backend), slots);
      },
      py::arg("spec"), py::arg("backend") = "simulator", py::arg("slots") = 8192);

  // ---------------------------------------------------------- data
  m.def(
      "gen_images",
      [](std::uint64_t seed, std::size_t count, std::size_t rows, std::size_t cols) {
        const modelio::Dataset d = modelio::gen_images(seed, count, rows, cols);
        return py::make_tuple(from_images(d.images), vector_to_array(d.labels));
      },
      py::arg("seed"), py::arg("count"), py::arg("rows") = 28, py::arg("cols") = 28,
      "Synthetic digit-like images; returns (images uint8[count, rows, cols], labels).");
  m.def(
      "load_mnist",
      [](const std::filesystem::path& images, const std::filesystem::path& labels) {
        const modelio::Dataset d = modelio::load_mnist(images, labels);
        return py::make_tuple(from_images(d.images), vector_to_array(d.labels));
      },
      py::arg("images"), py::arg("labels"));
  m.def(
      "to_instances",
      [](const U8Array& images, const nn::ModelSpec& s) { return to_matrix(modelio::to_instances(to_images(images), s)); },
      py::arg("images"), py::arg("spec"), "Pixels times the input scale, as residues mod p.");

  // ---------------------------------------------------------- inference
  m.def(
      "infer_plain",
      [](const nn::ModelSpec& s, const U64Array& instances) {
        const auto inst = from_matrix(instances);
        std::vector<he::Slots> out;
        {
          py::gil_scoped_release release;
          out = nn::infer_plain(s, inst);
        }
        return to_matrix(out);
      },
      py::arg("spec"), py::arg("instances"), "Integer logits in [0, p), one row per instance.");
  m.def(
      "predict", [](const U64Array& logits, std::uint64_t p) { return nn::predict(to_slots(logits), p); },
      py::arg("logits"), py::arg("p"));
  m.def(
      "dequantized_trace",
      [](const nn::ModelSpec& s, const U64Array& instance) { return nn::dequantized_trace(s, to_slots(instance)); },
      py::arg("spec"), py::arg("instance"), "Real value of every layer output in plaintext mode.");

  py::class_<app::CipherBatch>(m, "CipherBatch")
      .def_readonly("count", &app::CipherBatch::count)
      .def_property_readonly("shape", [](const app::CipherBatch& b) { return b.shape.dims; })
      .def_property_readonly("key_id", [](const app::CipherBatch& b) { return he::key_id_hex(b.key_id); })
      .def_property_readonly("size", [](const app::CipherBatch& b) { return b.cts.size(); })
      .def("to_bytes", [](const app::CipherBatch& b) { return from_bytes(app::serialize_batch(b)); })
      .def_static("from_bytes",
                  [](const py::bytes& b, const he::Backend& be) { return app::parse_batch(to_bytes(b), be); });
  m.def(
      "encrypt_batch",
      [](const he::Backend& be, const he::PublicKey& pk, const nn::ModelSpec& s, const U64Array& instances,
         const py::bytes& seed) {
        const auto inst = from_matrix(instances);
        he::Prng rng(to_bytes(seed), "python-batch");
        py::gil_scoped_release release;
        return app::encrypt_batch(be, pk, s, inst, rng);
      },
      py::arg("backend"), py::arg("pk"), py::arg("spec"), py::arg("instances"), py::arg("seed"));
  m.def(
      "infer_batch",
      [](const he::Backend& be, const he::RelinKey& rk, const nn::ModelSpec& s, const app::CipherBatch& b) {
        return app::infer_batch(be, rk, s, b);
      },
      py::arg("backend"), py::arg("rk"), py::arg("spec"), py::arg("batch"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "decrypt_batch",
      [](const he::Backend& be, const he::SecretKey& sk, const app::CipherBatch& b) {
        return to_matrix(app::decrypt_batch(be, sk, b));
      },
      py::arg("backend"), py::arg("sk"), py::arg("batch"));
  m.def(
      "run_e2e",
      [](const he::Backend& be, const he::KeySet& keys, const modelio::ModelFile& f, const nn::ModelSpec& s,
         const U8Array& images, std::optional<U8Array> labels, const py::bytes& seed) {
        const modelio::Dataset d = to_dataset(images, labels);
        he::Prng rng(to_bytes(seed), "python-e2e");
        std::string text;
        {
          py::gil_scoped_release release;
          text = app::run_e2e(be, keys, f, s, d, rng).to_json();
        }
        return json_to_py(text);
      },
      py::arg("backend"), py::arg("keys"), py::arg("file"), py::arg("spec"), py::arg("images"),
      py::arg("labels") = py::none(), py::arg("seed") = py::bytes("e2e"));
  m.def(
      "bench",
      [](const he::HEParams& params, const nn::ModelSpec& s, const U8Array& images, std::size_t batch,
         std::uint64_t seed) {
        const modelio::Dataset d = to_dataset(images, std::nullopt);
        std::string text;
        {
          py::gil_scoped_release release;
          text = app::bench(params, s, d, batch, seed).to_json();
        }
        return json_to_py(text);
      },
      py::arg("params"), py::arg("spec"), py::arg("images"), py::arg("batch"), py::arg("seed") = 1);

  // ---------------------------------------------------------- transport
  py::class_<BackgroundServer>(m, "Server")
      .def(py::init<nn::ModelSpec, const std::string&, std::uint16_t, double>(), py::arg("spec"),
           py::arg("host") = "127.0.0.1", py::arg("port") = 0, py::arg("io_timeout") = 60.0)
      .def_property_readonly("port", &BackgroundServer::port)
      .def_property_readonly("handled", &BackgroundServer::handled)
      .def("stop", &BackgroundServer::stop, py::call_guard<py::gil_scoped_release>())
      .def("__enter__", [](BackgroundServer& s) -> BackgroundServer& { return s; }, py::return_value_policy::reference)
      .def("__exit__", [](BackgroundServer& s, py::args) {
        py::gil_scoped_release release;
        s.stop();
      });
  m.def(
      "send_job",
      [](const std::string& host, std::uint16_t port, const he::Backend& be, const he::PublicKey& pk,
         const he::RelinKey& rk, const app::CipherBatch& b, double timeout) {
        return net::send_job(host, port, be, pk, rk, b,
                             std::chrono::milliseconds(static_cast<long long>(timeout * 1000.0)));
      },
      py::arg("host"), py::arg("port"), py::arg("backend"), py::arg("pk"), py::arg("rk"), py::arg("batch"),
      py::arg("timeout") = 600.0, py::call_guard<py::gil_scoped_release>());
}
