// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace cdl {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad parameters, schema violations, shape mismatches.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An integer would not fit the plaintext modulus, or a circuit needs more
/// multiplicative depth than the ciphertext has left.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class LevelExhausted : public CapacityError {
 public:
  using CapacityError::CapacityError;
};

/// Decryption refused: the ciphertext noise reached the decryption threshold
/// (or the ciphertext was produced under a different key).
class NoiseExhausted : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

/// Raised by the orthogonalisation when a basis vector collapses.
class DegenerateBasis : public Error {
 public:
  using Error::Error;
};

/// Process exit code for an error: 2 validation, 3 capacity or depth,
/// 4 noise exhausted, 5 transport, 1 anything else.
inline int exit_code_of(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const CapacityError*>(&e)) return 3;
  if (dynamic_cast<const NoiseExhausted*>(&e)) return 4;
  if (dynamic_cast<const TransportError*>(&e)) return 5;
  return 1;
}

}  // namespace cdl
