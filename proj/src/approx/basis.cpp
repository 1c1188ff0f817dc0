// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/approx/basis.hpp"

#include <cmath>
#include <string>

#include "cdl/error.hpp"

namespace cdl::approx {

namespace {

// Polynomials are carried alongside their values at the quadrature nodes so
// every inner product is a weighted dot product.
struct Sampled {
  Polynomial poly;
  std::vector<double> values;
};

double dot(const std::vector<double>& a, const std::vector<double>& b, const QuadratureRule& rule) {
  double acc = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j) acc += rule.weights[j] * a[j] * b[j];
  return acc;
}

std::vector<double> sample(const Polynomial& p, const QuadratureRule& rule) {
  std::vector<double> v(rule.size());
  for (std::size_t j = 0; j < rule.size(); ++j) v[j] = p(rule.nodes[j]);
  return v;
}

}  // namespace

OrthoBasis gram_schmidt(const Measure& measure, int max_degree, std::size_t n_nodes) {
  if (max_degree < 0) throw ValidationError("max_degree must be >= 0");
  OrthoBasis basis{measure, quadrature_for(measure, n_nodes), {}};
  const QuadratureRule& rule = basis.rule;
  std::vector<Sampled> done;
  done.reserve(static_cast<std::size_t>(max_degree) + 1);

  for (int k = 0; k <= max_degree; ++k) {
    Sampled cand;
    if (k == 0) {
      cand.poly = Polynomial({1.0});
    } else {
      cand.poly = Polynomial({0.0, 1.0}) * done.back().poly;
    }
    cand.values = sample(cand.poly, rule);
    const double start_norm = std::sqrt(dot(cand.values, cand.values, rule));

    for (int pass = 0; pass < 2; ++pass) {
      for (const Sampled& q : done) {
        const double c = dot(cand.values, q.values, rule);
        cand.poly -= q.poly * c;
        for (std::size_t j = 0; j < rule.size(); ++j) cand.values[j] -= c * q.values[j];
      }
    }
    const double norm = std::sqrt(dot(cand.values, cand.values, rule));
    if (!(norm > 1e-12) || !(norm > 1e-12 * start_norm)) {
      throw DegenerateBasis("measure " + measure.describe() + " cannot support degree " + std::to_string(k));
    }
    // Polynomial arithmetic may leave stray coefficients above degree k.
    std::vector<double> c = cand.poly.coeffs();
    c.resize(static_cast<std::size_t>(k) + 1, 0.0);
    cand.poly = Polynomial(std::move(c)) * (1.0 / norm);
    cand.values = sample(cand.poly, rule);
    done.push_back(std::move(cand));
  }

  for (Sampled& s : done) basis.polys.push_back(std::move(s.poly));
  return basis;
}

}  // namespace cdl::approx
