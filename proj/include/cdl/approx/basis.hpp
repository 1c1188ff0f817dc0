// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "cdl/approx/measure.hpp"
#include "cdl/approx/polynomial.hpp"

namespace cdl::approx {

/// Default quadrature resolution used when building bases.
inline constexpr std::size_t kDefaultQuadratureNodes = 512;

/// Polynomials 0..d that are orthonormal under `measure`, each with a
/// positive leading coefficient. Carries the quadrature rule it was built
/// with so projections use the same discrete inner product.
struct OrthoBasis {
  Measure measure;
  QuadratureRule rule;
  std::vector<Polynomial> polys;

  int max_degree() const { return static_cast<int>(polys.size()) - 1; }
  double inner(const RealFn& f, const RealFn& g) const { return inner_product(f, g, rule); }
};

/// Gram-Schmidt orthonormalisation of 1, x, x^2, ... under `measure`.
///
/// The k-th candidate is taken as x * polys[k-1] rather than x^k; both span
/// the same space and the positive-leading-coefficient orthonormal basis is
/// unique, but the recurrence form stays well conditioned on wide intervals.
/// Each candidate is orthogonalised twice (modified Gram-Schmidt).
///
/// Throws DegenerateBasis if a candidate's norm drops below 1e-12.
OrthoBasis gram_schmidt(const Measure& measure, int max_degree,
                        std::size_t n_nodes = kDefaultQuadratureNodes);

}  // namespace cdl::approx
