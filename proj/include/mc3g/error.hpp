#ifndef MC3G_ERROR_HPP
#define MC3G_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mc3g {

// Root of every error the library throws. The CLI maps the three
// intermediate categories onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input files, schemas, rules or arguments (exit 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The classifier being explained misbehaved (exit 3).
class AdapterError : public Error {
 public:
  using Error::Error;
};

class SchemaMismatch : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class UnknownFeature : public ConfigError {
 public:
  explicit UnknownFeature(const std::string& name)
      : ConfigError("unknown feature '" + name + "'"), feature_(name) {}
  const std::string& feature() const { return feature_; }

 private:
  std::string feature_;
};

class DomainViolation : public ConfigError {
 public:
  DomainViolation(const std::string& what, std::size_t row, std::string column)
      : ConfigError(what + " (row " + std::to_string(row) + ", column '" +
                    column + "')"),
        row_(row),
        column_(std::move(column)) {}
  explicit DomainViolation(const std::string& what)
      : ConfigError(what), row_(npos), column_() {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : ConfigError("line " + std::to_string(line) + ", column " +
                    std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  explicit ParseError(const std::string& what)
      : ConfigError(what), line_(0), column_(0) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class CyclicCausalGraph : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NegativeWeight : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class CausallyInconsistentInput : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class EmptyDataset : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class GridTooLarge : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class BlackBoxFailure : public AdapterError {
 public:
  BlackBoxFailure(const std::string& what, std::size_t row)
      : AdapterError(what + " (row " + std::to_string(row) + ")"), row_(row) {}

  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class ProtocolError : public AdapterError {
 public:
  using AdapterError::AdapterError;
};

class MissingPrediction : public AdapterError {
 public:
  using AdapterError::AdapterError;
};

class Timeout : public AdapterError {
 public:
  using AdapterError::AdapterError;
};

// Raised when the instance to explain already receives the favorable outcome.
class NotAdverse : public Error {
 public:
  using Error::Error;
};

}  // namespace mc3g

#endif  // MC3G_ERROR_HPP
