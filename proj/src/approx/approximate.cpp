// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/approx/approximate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "cdl/error.hpp"

namespace cdl::approx {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu" || s == "ReLU") return Activation::ReLU;
  if (s == "sigmoid" || s == "Sigmoid") return Activation::Sigmoid;
  if (s == "tanh" || s == "Tanh") return Activation::Tanh;
  throw ValidationError("unknown activation: " + s);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::PointFit: return "point_fit";
    case Method::Taylor: return "taylor";
    case Method::ChebyshevStd: return "chebyshev";
    case Method::ChebyshevModified: return "chebyshev_modified";
    case Method::DerivativeIntegral: return "derivative";
    case Method::Projection: return "projection";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  if (s == "point_fit" || s == "points") return Method::PointFit;
  if (s == "taylor") return Method::Taylor;
  if (s == "chebyshev") return Method::ChebyshevStd;
  if (s == "chebyshev_modified" || s == "modified") return Method::ChebyshevModified;
  if (s == "derivative") return Method::DerivativeIntegral;
  if (s == "projection") return Method::Projection;
  throw ValidationError("unknown approximation method: " + s);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double activation(Activation kind, double x) {
  switch (kind) {
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return 2.0 * sigmoid(2.0 * x) - 1.0;
  }
  return 0.0;
}

RealFn activation_fn(Activation kind) {
  return [kind](double x) { return activation(kind, x); };
}

double sup_error(const RealFn& f, const Polynomial& p, const Interval& iv, std::size_t grid) {
  if (grid < 2) throw ValidationError("sup_error grid needs at least 2 points");
  double worst = 0.0;
  const double step = iv.width() / static_cast<double>(grid - 1);
  for (std::size_t i = 0; i < grid; ++i) {
    const double x = i + 1 == grid ? iv.hi : iv.lo + step * static_cast<double>(i);
    worst = std::max(worst, std::abs(f(x) - p(x)));
  }
  return worst;
}

namespace {

double l2_distance(const RealFn& f, const Polynomial& p, const QuadratureRule& rule) {
  double acc = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j) {
    const double d = f(rule.nodes[j]) - p(rule.nodes[j]);
    acc += rule.weights[j] * d * d;
  }
  return std::sqrt(std::max(acc, 0.0));
}

Method method_for(const Measure& m) {
  switch (m.family()) {
    case MeasureFamily::ChebyshevStretched: return Method::ChebyshevStd;
    case MeasureFamily::ModifiedRelu: return Method::ChebyshevModified;
    default: return Method::Projection;
  }
}

// Expands sum_k a_k (x - c)^k in powers of x.
Polynomial recenter(const std::vector<double>& shifted, double center) {
  return Polynomial(shifted).compose_affine(1.0, -center);
}

}  // namespace

ApproxReport project(const RealFn& f, const OrthoBasis& basis) {
  Polynomial p(std::vector<double>(basis.polys.size(), 0.0));
  for (const Polynomial& phi : basis.polys) {
    const double c = basis.inner(f, [&phi](double x) { return phi(x); });
    p += phi * c;
  }
  ApproxReport r;
  r.poly = std::move(p);
  r.interval = basis.measure.interval();
  r.sup_error = sup_error(f, r.poly, r.interval);
  r.l2_error = l2_distance(f, r.poly, basis.rule);
  r.method = method_for(basis.measure);
  r.measure = basis.measure.describe();
  return r;
}

ApproxReport project_activation(Activation kind, const OrthoBasis& basis) {
  ApproxReport r = project(activation_fn(kind), basis);
  r.target = kind;
  return r;
}

ApproxReport fit_points(std::span<const Sample> samples, int degree) {
  if (degree < 0) throw ValidationError("degree must be >= 0");
  std::set<double> distinct;
  for (const Sample& s : samples) distinct.insert(s.x);
  const auto cols = static_cast<Eigen::Index>(degree) + 1;
  if (static_cast<Eigen::Index>(distinct.size()) < cols) {
    throw ValidationError("least-squares fit of degree " + std::to_string(degree) + " needs at least " +
                          std::to_string(cols) + " distinct sample points");
  }
  const double lo = *distinct.begin();
  const double hi = *distinct.rbegin();
  // Fit in u = (x - mid) / half so the Vandermonde matrix stays well scaled.
  const double mid = 0.5 * (lo + hi);
  const double half = hi > lo ? 0.5 * (hi - lo) : 1.0;

  const auto rows = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd v(rows, cols);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double u = (samples[static_cast<std::size_t>(i)].x - mid) / half;
    double pw = 1.0;
    for (Eigen::Index k = 0; k < cols; ++k) {
      v(i, k) = pw;
      pw *= u;
    }
    y(i) = samples[static_cast<std::size_t>(i)].y;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
  if (qr.rank() < cols) throw ValidationError("least-squares system is rank deficient");
  const Eigen::VectorXd b = qr.solve(y);

  std::vector<double> in_u(b.data(), b.data() + b.size());
  ApproxReport r;
  r.poly = Polynomial(in_u).compose_affine(1.0 / half, -mid / half);
  r.method = Method::PointFit;
  r.interval = hi > lo ? Interval(lo, hi) : Interval(lo - 1.0, lo + 1.0);
  double sq = 0.0;
  for (const Sample& s : samples) {
    const double d = std::abs(s.y - r.poly(s.x));
    r.sup_error = std::max(r.sup_error, d);
    sq += d * d;
  }
  r.l2_error = std::sqrt(sq / static_cast<double>(samples.size()));
  return r;
}

ApproxReport fit_function(Activation kind, const Interval& iv, int degree, std::size_t n_samples) {
  if (n_samples < 2) throw ValidationError("need at least two samples");
  const RealFn f = activation_fn(kind);
  std::vector<Sample> samples(n_samples);
  const double step = iv.width() / static_cast<double>(n_samples - 1);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double x = i + 1 == n_samples ? iv.hi : iv.lo + step * static_cast<double>(i);
    samples[i] = {x, f(x)};
  }
  ApproxReport r = fit_points(samples, degree);
  r.interval = iv;
  r.target = kind;
  r.sup_error = sup_error(f, r.poly, iv);
  r.l2_error = l2_distance(f, r.poly, quadrature_for(Measure::lebesgue(iv), kDefaultQuadratureNodes));
  r.measure = Measure::lebesgue(iv).describe();
  return r;
}

Polynomial taylor_poly(Activation kind, double center, int degree) {
  if (kind == Activation::ReLU) {
    throw ValidationError("ReLU has no Taylor series; use relu_taylor_poly");
  }
  if (degree < 0 || degree > kMaxTaylorDegree) {
    throw ValidationError("Taylor degree must lie in [0, " + std::to_string(kMaxTaylorDegree) + "]");
  }
  // d/dx P(v) = P'(v) * g(v), with g(v) = v(1 - v) for the sigmoid and
  // 1 - v^2 for tanh. Start from P_0(v) = v.
  const Polynomial g = kind == Activation::Sigmoid ? Polynomial({0.0, 1.0, -1.0}) : Polynomial({1.0, 0.0, -1.0});
  const double v = kind == Activation::Sigmoid ? sigmoid(center) : std::tanh(center);
  Polynomial dk({0.0, 1.0});
  std::vector<double> shifted(static_cast<std::size_t>(degree) + 1);
  double factorial = 1.0;
  for (int k = 0; k <= degree; ++k) {
    if (k > 0) {
      dk = dk.derivative() * g;
      factorial *= static_cast<double>(k);
    }
    shifted[static_cast<std::size_t>(k)] = dk(v) / factorial;
  }
  return recenter(shifted, center);
}

Polynomial relu_taylor_poly(double center, int degree) {
  if (degree < 1 || degree > kMaxTaylorDegree + 1) {
    throw ValidationError("ReLU Taylor degree must lie in [1, " + std::to_string(kMaxTaylorDegree + 1) + "]");
  }
  // softplus' = sigmoid, so integrate the sigmoid series about the same point.
  const Polynomial s = taylor_poly(Activation::Sigmoid, center, degree - 1);
  // Shift to powers of (x - c), integrate, anchor at softplus(c).
  const Polynomial s_shifted = s.compose_affine(1.0, center);
  const Polynomial sp_shifted = s_shifted.antiderivative(softplus(center));
  return recenter(sp_shifted.coeffs(), center);
}

ApproxReport taylor_report(Activation kind, double center, int degree, const Interval& iv) {
  ApproxReport r;
  r.poly = kind == Activation::ReLU ? relu_taylor_poly(center, degree) : taylor_poly(kind, center, degree);
  r.method = Method::Taylor;
  r.interval = iv;
  r.target = kind;
  const RealFn f = activation_fn(kind);
  r.sup_error = sup_error(f, r.poly, iv);
  const Measure leb = Measure::lebesgue(iv);
  r.l2_error = l2_distance(f, r.poly, quadrature_for(leb, kDefaultQuadratureNodes));
  r.measure = leb.describe();
  return r;
}

ApproxReport relu_via_derivative(const Interval& iv, int sigmoid_degree, const Measure& measure,
                                 std::size_t n_nodes) {
  if (!iv.is_symmetric()) throw ValidationError("derivative method needs a symmetric interval");
  if (!(measure.interval() == iv)) throw ValidationError("measure interval must match the approximation interval");
  if (sigmoid_degree < 0) throw ValidationError("sigmoid degree must be >= 0");

  const OrthoBasis basis = gram_schmidt(measure, sigmoid_degree, n_nodes);
  const ApproxReport surrogate = project_activation(Activation::Sigmoid, basis);
  Polynomial q = surrogate.poly;
  {
    std::vector<double> c = q.coeffs();
    c.resize(static_cast<std::size_t>(sigmoid_degree) + 1, 0.0);
    q = Polynomial(std::move(c));
  }
  const Polynomial p0 = q.antiderivative(0.0);

  // argmin_c ||relu - p0 - c||_mu is the mu-mean of (relu - p0).
  const RealFn relu = activation_fn(Activation::ReLU);
  const QuadratureRule& rule = basis.rule;
  double num = 0.0;
  double mass = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j) {
    num += rule.weights[j] * (relu(rule.nodes[j]) - p0(rule.nodes[j]));
    mass += rule.weights[j];
  }
  ApproxReport r;
  r.poly = q.antiderivative(num / mass);
  r.method = Method::DerivativeIntegral;
  r.interval = iv;
  r.target = Activation::ReLU;
  r.measure = measure.describe();
  r.sup_error = sup_error(relu, r.poly, iv);
  r.l2_error = l2_distance(relu, r.poly, rule);
  return r;
}

}  // namespace cdl::approx
