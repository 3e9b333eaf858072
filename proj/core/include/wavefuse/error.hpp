#pragma once

#include <stdexcept>
#include <string>

namespace wavefuse {

/// Tensor dimension mismatch or an operand whose extents violate an op's
/// precondition (odd size for a stride-2 op, non-integral conv output, ...).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed on-disk data (KITTI files, PPM, feature dumps, config text).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Semantically invalid argument (severity out of range, empty set, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A corruption kind was handed to the generator for the wrong signal.
class KindError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Synthetic scene generation could not satisfy its constraints.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wavefuse
