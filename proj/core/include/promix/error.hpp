#pragma once

#include <stdexcept>
#include <string>

namespace promix {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument did not hold (dimension mismatch, empty set,
// out-of-range class, invalid configuration value).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Optimization produced a non-finite objective.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Malformed embedding or checkpoint file.
class FormatError : public Error {
 public:
  enum class Kind {
    kBadMagic,
    kBadHeader,
    kTruncated,
    kNonFinite,
    kNotNormalized,
    kBadLabel,
    kTrailingData,
    kIo,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace promix
