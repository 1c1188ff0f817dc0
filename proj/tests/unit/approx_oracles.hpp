// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

// Reference computations that share no code with the approx module: GSL
// adaptive quadrature, long-double normal equations, golden-section search.

#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace cdl::oracle {

using Fn = std::function<double(double)>;

enum class Weight { Lebesgue, Chebyshev, GaussianTail, ModifiedRelu };

struct WeightSpec {
  Weight kind;
  double lo;
  double hi;
  double param;  // l for Chebyshev/GaussianTail, eps for ModifiedRelu
};

inline double plain_weight(const WeightSpec& w, double x) {
  switch (w.kind) {
    case Weight::Lebesgue: return 1.0;
    case Weight::Chebyshev: return 0.0;  // handled by qaws
    case Weight::GaussianTail: return x == 0.0 ? 0.0 : std::exp(-(w.param / x) * (w.param / x));
    case Weight::ModifiedRelu: return std::exp(-1.0 / (w.param + x * x));
  }
  return 0.0;
}

namespace detail {
struct Ctx {
  const Fn* f;
  const WeightSpec* w;
};
inline double plain_integrand(double x, void* p) {
  auto* c = static_cast<Ctx*>(p);
  return (*c->f)(x) * plain_weight(*c->w, x);
}
inline double bare_integrand(double x, void* p) {
  auto* c = static_cast<Ctx*>(p);
  return (*c->f)(x);
}
}  // namespace detail

// Integral of f against the measure, to roughly 1e-13 relative accuracy.
inline double integrate(const Fn& f, const WeightSpec& w) {
  gsl_set_error_handler_off();
  gsl_integration_workspace* ws = gsl_integration_workspace_alloc(4000);
  detail::Ctx ctx{&f, &w};
  double result = 0.0;
  double abserr = 0.0;
  int status = 0;
  if (w.kind == Weight::Chebyshev) {
    // (x - lo)^(-1/2) (hi - x)^(-1/2) equals 1/(l sqrt(1 - (x/l)^2)) on [-l, l].
    gsl_integration_qaws_table* t = gsl_integration_qaws_table_alloc(-0.5, -0.5, 0, 0);
    gsl_function F{&detail::bare_integrand, &ctx};
    status = gsl_integration_qaws(&F, w.lo, w.hi, t, 1e-14, 1e-12, 4000, ws, &result, &abserr);
    gsl_integration_qaws_table_free(t);
  } else {
    gsl_function F{&detail::plain_integrand, &ctx};
    std::vector<double> pts{w.lo};
    if (w.lo < 0.0 && w.hi > 0.0) pts.push_back(0.0);
    pts.push_back(w.hi);
    status = gsl_integration_qagp(&F, pts.data(), pts.size(), 1e-14, 1e-12, 4000, ws, &result, &abserr);
  }
  gsl_integration_workspace_free(ws);
  if (status != GSL_SUCCESS && status != GSL_EROUND) {
    throw std::runtime_error(std::string("oracle quadrature failed: ") + gsl_strerror(status));
  }
  return result;
}

inline double inner(const Fn& f, const Fn& g, const WeightSpec& w) {
  return integrate([&](double x) { return f(x) * g(x); }, w);
}

inline long double horner(const std::vector<long double>& c, long double x) {
  long double acc = 0.0L;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

// Solves the (small, symmetric positive definite) system by Gaussian
// elimination with partial pivoting in long double.
inline std::vector<long double> solve(std::vector<std::vector<long double>> a, std::vector<long double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const long double m = a[r][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[r][k] -= m * a[col][k];
      b[r] -= m * b[col];
    }
  }
  std::vector<long double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    long double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

// Weighted least squares in monomials of u = x / scale, returned in x.
inline std::vector<double> weighted_lsq(const std::vector<double>& xs, const std::vector<double>& ys,
                                        const std::vector<double>& ws, int degree, double scale) {
  const std::size_t m = static_cast<std::size_t>(degree) + 1;
  std::vector<std::vector<long double>> a(m, std::vector<long double>(m, 0.0L));
  std::vector<long double> b(m, 0.0L);
  std::vector<long double> pw(m);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double u = static_cast<long double>(xs[i]) / scale;
    pw[0] = 1.0L;
    for (std::size_t k = 1; k < m; ++k) pw[k] = pw[k - 1] * u;
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) a[r][c] += ws[i] * pw[r] * pw[c];
      b[r] += ws[i] * pw[r] * ys[i];
    }
  }
  const std::vector<long double> cu = solve(a, b);
  std::vector<double> cx(m);
  long double sp = 1.0L;
  for (std::size_t k = 0; k < m; ++k) {
    cx[k] = static_cast<double>(cu[k] / sp);
    sp *= scale;
  }
  return cx;
}

// Dense discretisation of a measure: nodes and weights of a midpoint rule in
// the variable that makes the weight smooth.
struct Grid {
  std::vector<double> x;
  std::vector<double> w;
};

inline Grid dense_grid(const WeightSpec& spec, std::size_t n) {
  Grid g;
  g.x.resize(n);
  g.w.resize(n);
  if (spec.kind == Weight::Chebyshev) {
    const double l = spec.param;
    for (std::size_t i = 0; i < n; ++i) {
      const double th = std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      g.x[i] = l * std::cos(th);
      g.w[i] = std::numbers::pi / static_cast<double>(n);
    }
    return g;
  }
  const double h = (spec.hi - spec.lo) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.x[i] = spec.lo + h * (static_cast<double>(i) + 0.5);
    g.w[i] = h * plain_weight(spec, g.x[i]);
  }
  return g;
}

inline double golden_section(const Fn& f, double a, double b, double tol = 1e-12) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double ref_relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace cdl::oracle
