// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace cdl::approx {

using RealFn = std::function<double(double)>;

struct Interval {
  double lo = -1.0;
  double hi = 1.0;

  Interval() = default;
  Interval(double lo_, double hi_);

  static Interval symmetric(double l) { return Interval(-l, l); }

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool is_symmetric() const { return lo == -hi; }
  bool operator==(const Interval&) const = default;
};

enum class MeasureFamily { Lebesgue, ChebyshevStretched, GaussianTail, ModifiedRelu };

std::string to_string(MeasureFamily f);
MeasureFamily measure_family_from_string(const std::string& s);

/// A finite measure dmu = w(x) dx on a compact interval.
///
///   Lebesgue            w = 1
///   ChebyshevStretched  w = 1 / (l sqrt(1 - (x/l)^2)),  interval [-l, l]
///   GaussianTail        w = exp(-(l/x)^2),  w(0) = 0
///   ModifiedRelu        w = exp(-1 / (eps + x^2))
class Measure {
 public:
  static constexpr double kDefaultEps = 1e-5;

  static Measure lebesgue(Interval iv);
  static Measure chebyshev(double l);
  static Measure gaussian_tail(double l);
  static Measure gaussian_tail(double l, Interval iv);
  static Measure modified_relu(Interval iv, double eps = kDefaultEps);

  MeasureFamily family() const { return family_; }
  /// l for the Chebyshev and Gaussian-tail families, eps for ModifiedRelu.
  double param() const { return param_; }
  const Interval& interval() const { return interval_; }

  double weight(double x) const;
  std::string describe() const;

 private:
  Measure(MeasureFamily f, double param, Interval iv);

  MeasureFamily family_;
  double param_;
  Interval interval_;
};

/// Nodes and weights with the measure's density already folded into the
/// weights: integral f dmu ~= sum_j weights[j] * f(nodes[j]).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
  double integrate(const RealFn& f) const;
  double total_mass() const;
};

/// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
QuadratureRule gauss_legendre(std::size_t n);

/// Composite Gauss-Legendre rule for `measure` with about `n_nodes` nodes.
///
/// Rules with fewer than 32 nodes are a single panel. Larger rules are built
/// from an even number of 16-point panels, so the midpoint of a symmetric
/// interval (the kink of ReLU) is always a panel boundary. The Chebyshev
/// family is integrated in theta after x = l cos(theta), which turns
/// dmu into d(theta) on [0, pi] and removes the endpoint singularities.
QuadratureRule quadrature_for(const Measure& measure, std::size_t n_nodes);

double inner_product(const RealFn& f, const RealFn& g, const QuadratureRule& rule);

}  // namespace cdl::approx
