// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/approx/report.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cdl/error.hpp"

namespace cdl::approx {

using nlohmann::json;

std::string report_to_json(const ApproxReport& r, int indent) {
  json j;
  j["method"] = to_string(r.method);
  j["interval"] = {{"lo", r.interval.lo}, {"hi", r.interval.hi}};
  j["coeffs"] = r.poly.coeffs();
  j["sup_error"] = r.sup_error;
  j["l2_error"] = r.l2_error;
  if (r.target) j["activation"] = to_string(*r.target);
  if (!r.measure.empty()) j["measure"] = r.measure;
  return j.dump(indent);
}

ApproxReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("activation report is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("activation report must be a JSON object");
  ApproxReport r;
  try {
    if (!j.contains("coeffs") || !j["coeffs"].is_array()) {
      throw ValidationError("activation report needs a \"coeffs\" array");
    }
    std::vector<double> c;
    for (const auto& v : j["coeffs"]) {
      if (!v.is_number()) throw ValidationError("activation coefficients must be numbers");
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw ValidationError("activation coefficients must be finite");
      c.push_back(d);
    }
    r.poly = Polynomial(std::move(c));
    if (j.contains("method")) r.method = method_from_string(j["method"].get<std::string>());
    if (j.contains("interval")) {
      r.interval = Interval(j["interval"].at("lo").get<double>(), j["interval"].at("hi").get<double>());
    }
    r.sup_error = j.value("sup_error", 0.0);
    r.l2_error = j.value("l2_error", 0.0);
    if (r.sup_error < 0.0 || r.l2_error < 0.0) throw ValidationError("report errors must be non-negative");
    if (j.contains("activation")) r.target = activation_from_string(j["activation"].get<std::string>());
    r.measure = j.value("measure", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed activation report: ") + e.what());
  }
  return r;
}

void save_report(const ApproxReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << report_to_json(r) << '\n';
}

ApproxReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

}  // namespace cdl::approx
