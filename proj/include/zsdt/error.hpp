#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace zsdt {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownFeature : public Error {
 public:
  explicit UnknownFeature(std::string feature)
      : Error("unknown feature: '" + feature + "'"), feature_(std::move(feature)) {}
  const std::string& feature() const noexcept { return feature_; }

 private:
  std::string feature_;
};

class MissingValue : public Error {
 public:
  explicit MissingValue(const std::string& feature)
      : Error("missing value for feature '" + feature + "'") {}
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

/// A CSV cell that cannot be converted to its column's declared kind.
class CellTypeError : public Error {
 public:
  CellTypeError(std::size_t row, std::size_t column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column " + std::to_string(column) + ": " + what),
        row_(row),
        column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class AllMissingColumn : public Error {
 public:
  explicit AllMissingColumn(const std::string& column)
      : Error("column '" + column + "' has no observed training values") {}
};

class TooFewSamples : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NetworkError : public Error {
 public:
  using Error::Error;
};

class AuthError : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

class EmptyResponse : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

/// Raised when offline mode needs a completion that is not cached.
class OfflineCacheMiss : public NetworkError {
 public:
  using NetworkError::NetworkError;
};

class ScriptExhausted : public Error {
 public:
  using Error::Error;
};

class ExhaustedAttempts : public Error {
 public:
  ExhaustedAttempts(std::size_t calls, std::string last_reason)
      : Error("no valid response after " + std::to_string(calls) + " attempts: " + last_reason),
        calls_(calls) {}
  std::size_t calls() const noexcept { return calls_; }

 private:
  std::size_t calls_;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Minimal value-or-error carrier (std::expected is not available on every
/// toolchain this builds on).
template <class T, class E>
class Expected {
 public:
  Expected(T value) : data_(std::in_place_index<0>, std::move(value)) {}  // NOLINT
  Expected(E error) : data_(std::in_place_index<1>, std::move(error)) {}  // NOLINT

  bool has_value() const noexcept { return data_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  const T& value() const& {
    if (!has_value()) throw Error("Expected::value() on an error");
    return std::get<0>(data_);
  }
  T&& value() && {
    if (!has_value()) throw Error("Expected::value() on an error");
    return std::get<0>(std::move(data_));
  }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

  const E& error() const& {
    if (has_value()) throw Error("Expected::error() on a value");
    return std::get<1>(data_);
  }

 private:
  std::variant<T, E> data_;
};

}  // namespace zsdt
