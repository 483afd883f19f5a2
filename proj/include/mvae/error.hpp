#ifndef MVAE_ERROR_HPP
#define MVAE_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvae {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or extent mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input outside an operation's domain (log of a non-positive value, bad index).
class DomainError : public Error {
 public:
  using Error::Error;
};

// An operation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Gaussian quotient whose numerator precision does not dominate.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

// Misuse of a gradient tape (consumed, foreign tensor, non-scalar loss).
class TapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed binary input; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace mvae

#endif  // MVAE_ERROR_HPP
