#pragma once

#include <stdexcept>
#include <string>

namespace altpgd {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector/matrix/model dimensions do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A class index outside [0, C) or an iteration index outside [0, T).
class RangeError : public Error {
 public:
  using Error::Error;
};

/// The DLR denominator |z_pi1 - z_pi3| fell below the guard.
class DegenerateLossError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable model/dataset file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Attack, schedule, or training configuration violates an invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A result failed an independent post-hoc check (e.g. an adversary left S(x)).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace altpgd
