#pragma once

#include <stdexcept>
#include <string>

namespace gce {

enum class ErrorKind {
  Config,
  Schema,
  Parse,
  DegenerateDesign,
  ContrastCompile,
  Singularity,
  FoldFeasibility,
  Partition,
  Numerical,
};

const char* to_string(ErrorKind kind);

/// Base for every error raised by the library. The kind drives the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error(ErrorKind::Config, m) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& m) : Error(ErrorKind::Schema, m) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error(ErrorKind::Parse, m) {}
};

class DegenerateDesignError : public Error {
 public:
  explicit DegenerateDesignError(const std::string& m)
      : Error(ErrorKind::DegenerateDesign, m) {}
};

class ContrastCompileError : public Error {
 public:
  explicit ContrastCompileError(const std::string& m)
      : Error(ErrorKind::ContrastCompile, m) {}
};

class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& m) : Error(ErrorKind::Singularity, m) {}
};

class FoldFeasibilityError : public Error {
 public:
  explicit FoldFeasibilityError(const std::string& m)
      : Error(ErrorKind::FoldFeasibility, m) {}
};

class PartitionError : public Error {
 public:
  explicit PartitionError(const std::string& m) : Error(ErrorKind::Partition, m) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& m) : Error(ErrorKind::Numerical, m) {}
};

/// Rethrows `e` as the same error type with `prefix` prepended to the message.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& prefix);

}  // namespace gce
