// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/approx/measure.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cdl/error.hpp"

namespace cdl::approx {

Interval::Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ValidationError("interval requires finite lo < hi");
  }
}

std::string to_string(MeasureFamily f) {
  switch (f) {
    case MeasureFamily::Lebesgue: return "lebesgue";
    case MeasureFamily::ChebyshevStretched: return "chebyshev";
    case MeasureFamily::GaussianTail: return "gaussian_tail";
    case MeasureFamily::ModifiedRelu: return "modified_relu";
  }
  return "unknown";
}

MeasureFamily measure_family_from_string(const std::string& s) {
  if (s == "lebesgue" || s == "legendre") return MeasureFamily::Lebesgue;
  if (s == "chebyshev") return MeasureFamily::ChebyshevStretched;
  if (s == "gaussian_tail") return MeasureFamily::GaussianTail;
  if (s == "modified_relu" || s == "modified") return MeasureFamily::ModifiedRelu;
  throw ValidationError("unknown measure family: " + s);
}

Measure::Measure(MeasureFamily f, double param, Interval iv) : family_(f), param_(param), interval_(iv) {}

Measure Measure::lebesgue(Interval iv) { return Measure(MeasureFamily::Lebesgue, 0.0, iv); }

Measure Measure::chebyshev(double l) {
  if (!(l > 0.0)) throw ValidationError("chebyshev measure needs l > 0");
  return Measure(MeasureFamily::ChebyshevStretched, l, Interval::symmetric(l));
}

Measure Measure::gaussian_tail(double l) { return gaussian_tail(l, Interval::symmetric(l)); }

Measure Measure::gaussian_tail(double l, Interval iv) {
  if (!(l > 0.0)) throw ValidationError("gaussian-tail measure needs l > 0");
  return Measure(MeasureFamily::GaussianTail, l, iv);
}

Measure Measure::modified_relu(Interval iv, double eps) {
  if (!(eps > 0.0)) throw ValidationError("modified measure needs eps > 0");
  return Measure(MeasureFamily::ModifiedRelu, eps, iv);
}

double Measure::weight(double x) const {
  switch (family_) {
    case MeasureFamily::Lebesgue:
      return 1.0;
    case MeasureFamily::ChebyshevStretched: {
      const double u = x / param_;
      const double r = 1.0 - u * u;
      return r > 0.0 ? 1.0 / (param_ * std::sqrt(r)) : 0.0;
    }
    case MeasureFamily::GaussianTail: {
      if (x == 0.0) return 0.0;
      const double q = param_ / x;
      return std::exp(-q * q);
    }
    case MeasureFamily::ModifiedRelu:
      return std::exp(-1.0 / (param_ + x * x));
  }
  return 0.0;
}

std::string Measure::describe() const {
  std::ostringstream os;
  os << to_string(family_);
  if (family_ == MeasureFamily::ModifiedRelu) {
    os << "(eps=" << param_ << ")";
  } else if (family_ != MeasureFamily::Lebesgue) {
    os << "(l=" << param_ << ")";
  }
  os << " on [" << interval_.lo << ", " << interval_.hi << "]";
  return os.str();
}

double QuadratureRule::integrate(const RealFn& f) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) acc += weights[j] * f(nodes[j]);
  return acc;
}

double QuadratureRule::total_mass() const {
  double acc = 0.0;
  for (double w : weights) acc += w;
  return acc;
}

QuadratureRule gauss_legendre(std::size_t n) {
  if (n < 1) throw ValidationError("Gauss-Legendre rule needs at least one node");
  if (n == 1) return QuadratureRule{{0.0}, {2.0}};
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (dn + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
        p0 = p1;
        p1 = p2;
      }
      dp = dn * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.weights[i] = w;
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

namespace {

constexpr std::size_t kPanelNodes = 16;

// Composite rule on [a, b] for a plain integrand; weights are d(var) only.
QuadratureRule composite(double a, double b, std::size_t n_nodes) {
  std::size_t panels = 1;
  std::size_t per_panel = n_nodes;
  if (n_nodes >= 2 * kPanelNodes) {
    panels = n_nodes / kPanelNodes;
    panels -= panels % 2;
    per_panel = kPanelNodes;
  }
  const QuadratureRule base = gauss_legendre(per_panel);
  QuadratureRule out;
  out.nodes.reserve(panels * per_panel);
  out.weights.reserve(panels * per_panel);
  const double h = (b - a) / static_cast<double>(panels);
  for (std::size_t p = 0; p < panels; ++p) {
    const double lo = a + h * static_cast<double>(p);
    const double half = 0.5 * h;
    const double mid = lo + half;
    for (std::size_t j = 0; j < per_panel; ++j) {
      out.nodes.push_back(mid + half * base.nodes[j]);
      out.weights.push_back(half * base.weights[j]);
    }
  }
  return out;
}

}  // namespace

QuadratureRule quadrature_for(const Measure& measure, std::size_t n_nodes) {
  if (n_nodes < 2) throw ValidationError("quadrature needs at least 2 nodes");
  const Interval& iv = measure.interval();
  if (measure.family() == MeasureFamily::ChebyshevStretched) {
    // x = l cos(theta): dx / (l sqrt(1 - (x/l)^2)) = d(theta), theta in [0, pi].
    QuadratureRule theta = composite(0.0, std::numbers::pi, n_nodes);
    QuadratureRule out;
    out.nodes.resize(theta.size());
    out.weights = theta.weights;
    for (std::size_t j = 0; j < theta.size(); ++j) out.nodes[j] = measure.param() * std::cos(theta.nodes[j]);
    return out;
  }
  QuadratureRule rule = composite(iv.lo, iv.hi, n_nodes);
  if (measure.family() != MeasureFamily::Lebesgue) {
    for (std::size_t j = 0; j < rule.size(); ++j) rule.weights[j] *= measure.weight(rule.nodes[j]);
  }
  return rule;
}

double inner_product(const RealFn& f, const RealFn& g, const QuadratureRule& rule) {
  double acc = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j) acc += rule.weights[j] * f(rule.nodes[j]) * g(rule.nodes[j]);
  return acc;
}

}  // namespace cdl::approx
