// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "cdl/approx/approximate.hpp"

namespace cdl::approx {

// JSON document: {method, interval:{lo,hi}, coeffs, sup_error, l2_error}
// plus optional "activation" and "measure" fields. Readers ignore keys they
// do not know, so a hand-written {"coeffs": [...]} file is also accepted
// with the remaining fields defaulted.
std::string report_to_json(const ApproxReport& r, int indent = 2);
ApproxReport report_from_json(const std::string& text);

void save_report(const ApproxReport& r, const std::filesystem::path& path);
ApproxReport load_report(const std::filesystem::path& path);

}  // namespace cdl::approx
