// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace cdl::approx {

/// Dense real polynomial, coefficients in ascending degree order.
///
/// The stored coefficient vector is kept as given so that a declared degree
/// survives round trips (a cubic whose leading coefficient happens to be
/// numerically zero is still reported with four coefficients). `degree()`
/// ignores trailing zeros.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {}
  Polynomial(std::initializer_list<double> coeffs) : coeffs_(coeffs) {}

  static Polynomial monomial(int degree, double coeff = 1.0);

  const std::vector<double>& coeffs() const { return coeffs_; }
  std::size_t size() const { return coeffs_.size(); }
  double coeff(std::size_t k) const { return k < coeffs_.size() ? coeffs_[k] : 0.0; }

  int degree() const;
  Polynomial trimmed() const;

  /// Horner evaluation.
  double operator()(double x) const;

  Polynomial derivative() const;
  Polynomial antiderivative(double constant = 0.0) const;

  /// Re-expands p(a*x + b) in powers of x.
  Polynomial compose_affine(double a, double b) const;

  Polynomial& operator+=(const Polynomial& rhs);
  Polynomial& operator-=(const Polynomial& rhs);
  Polynomial& operator*=(double s);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

 private:
  std::vector<double> coeffs_;
};

double eval_poly_real(const Polynomial& p, double x);

}  // namespace cdl::approx
