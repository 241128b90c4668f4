#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace failsearch {

// Broad failure classes; the CLI maps them onto process exit codes.
enum class ErrorClass {
  Validation,  // malformed input, schema mismatch, bad flags
  Execution,   // system-under-test or protocol failure
  Degenerate,  // data too small or one-sided to proceed
  Numeric,     // training diverged
};

class Error : public std::runtime_error {
public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  ErrorClass error_class() const noexcept { return class_; }

private:
  ErrorClass class_;
};

class SchemaError : public Error {
public:
  explicit SchemaError(const std::string& what) : Error(ErrorClass::Validation, what) {}
};

class SchemaMismatch : public Error {
public:
  explicit SchemaMismatch(const std::string& what) : Error(ErrorClass::Validation, what) {}
};

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error(ErrorClass::Validation, what) {}
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorClass::Validation, "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class GenerationFailed : public Error {
public:
  explicit GenerationFailed(int attempts)
      : Error(ErrorClass::Validation,
              "no valid configuration after " + std::to_string(attempts) + " attempts"),
        attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

private:
  int attempts_;
};

class DegenerateData : public Error {
public:
  explicit DegenerateData(const std::string& what) : Error(ErrorClass::Degenerate, what) {}
};

class Diverged : public Error {
public:
  explicit Diverged(int epoch)
      : Error(ErrorClass::Numeric, "training loss became non-finite at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

private:
  int epoch_;
};

class ExecutionError : public Error {
public:
  explicit ExecutionError(const std::string& what) : Error(ErrorClass::Execution, what) {}
};

class ProtocolError : public ExecutionError {
public:
  explicit ProtocolError(const std::string& what) : ExecutionError("protocol error: " + what) {}
};

class TimeoutError : public ExecutionError {
public:
  explicit TimeoutError(int run)
      : ExecutionError("run " + std::to_string(run) + " timed out"), run_(run) {}
  int run() const noexcept { return run_; }

private:
  int run_;
};

}  // namespace failsearch
