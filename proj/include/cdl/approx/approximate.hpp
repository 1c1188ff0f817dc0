// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdl/approx/basis.hpp"
#include "cdl/approx/measure.hpp"
#include "cdl/approx/polynomial.hpp"

namespace cdl::approx {

enum class Activation { ReLU, Sigmoid, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Closed-form activation value. Tanh is evaluated as 2 sigmoid(2x) - 1.
double activation(Activation kind, double x);
double sigmoid(double x);
double softplus(double x);

RealFn activation_fn(Activation kind);

enum class Method {
  PointFit,            // least squares through samples
  Taylor,              // truncated series about a point
  ChebyshevStd,        // projection under the stretched Chebyshev measure
  ChebyshevModified,   // projection under exp(-1/(eps + x^2))
  DerivativeIntegral,  // integrate a sigmoid surrogate (ReLU only)
  Projection,          // projection under any other measure
};

std::string to_string(Method m);
Method method_from_string(const std::string& s);

inline constexpr std::size_t kDefaultSupGrid = 10001;

struct ApproxReport {
  Polynomial poly;
  double sup_error = 0.0;  // max |f - p| on a uniform grid over `interval`
  double l2_error = 0.0;   // ||f - p|| in L2(mu)
  Method method = Method::Projection;
  Interval interval;
  std::optional<Activation> target;
  std::string measure;  // human-readable description, empty for PointFit/Taylor
};

/// max |f(x) - p(x)| over `grid` evenly spaced points including both ends.
double sup_error(const RealFn& f, const Polynomial& p, const Interval& iv, std::size_t grid = kDefaultSupGrid);

/// Best L2(mu) approximation: sum_k <f, phi_k> phi_k.
ApproxReport project(const RealFn& f, const OrthoBasis& basis);

/// Projection of a named activation; fills in `target` and picks the method
/// tag from the measure family.
ApproxReport project_activation(Activation kind, const OrthoBasis& basis);

struct Sample {
  double x;
  double y;
};

/// Least-squares polynomial of the given degree through `samples`.
/// Errors are measured at the samples (max residual and RMS residual).
/// Throws ValidationError when fewer than degree+1 distinct abscissae exist.
ApproxReport fit_points(std::span<const Sample> samples, int degree);

/// Samples `f` at `n_samples` evenly spaced points of `iv`, fits, then
/// re-measures sup/L2 error against `f` itself (L2 under Lebesgue on `iv`).
ApproxReport fit_function(Activation kind, const Interval& iv, int degree, std::size_t n_samples = 1001);

inline constexpr int kMaxTaylorDegree = 9;

/// Truncated Taylor polynomial of Sigmoid or Tanh about `center`, expanded
/// in powers of x. Derivatives come from the closed-form recurrences
/// s' = s(1 - s) and u' = 1 - u^2.
Polynomial taylor_poly(Activation kind, double center, int degree);

/// Taylor replacement for ReLU: the series of softplus(x) = log(1 + e^x),
/// the smooth ReLU whose derivative is the sigmoid.
Polynomial relu_taylor_poly(double center, int degree);

/// Report wrapper for any of the Taylor replacements over `iv`.
ApproxReport taylor_report(Activation kind, double center, int degree, const Interval& iv);

/// ReLU replacement built from its derivative: project the sigmoid onto a
/// degree-`sigmoid_degree` basis under `measure`, integrate, and choose the
/// integration constant that minimises the L2(mu) distance to ReLU.
ApproxReport relu_via_derivative(const Interval& iv, int sigmoid_degree, const Measure& measure,
                                 std::size_t n_nodes = kDefaultQuadratureNodes);

}  // namespace cdl::approx
