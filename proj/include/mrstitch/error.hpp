#pragma once

#include <stdexcept>
#include <string>

namespace mrstitch {

// Root of every error thrown by the library. `stage()` names the pipeline
// stage that raised it so the CLI can report it and pick an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class DecodeError : public Error {
 public:
  explicit DecodeError(const std::string& what) : Error("io", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error("correspondences", what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class InsufficientMatchesError : public Error {
 public:
  explicit InsufficientMatchesError(const std::string& what)
      : Error("correspondences", what) {}
};

class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& what)
      : Error("registration", what) {}
};

class DegeneracyError : public Error {
 public:
  explicit DegeneracyError(const std::string& what)
      : Error("registration", what) {}
};

class NoRegistrationError : public Error {
 public:
  explicit NoRegistrationError(const std::string& what, bool only_near_identity = false)
      : Error("registration", what), only_near_identity_(only_near_identity) {}
  // Every rejected candidate was rejected for being too close to the
  // identity: the candidate adds nothing outside the reference.
  bool only_near_identity() const { return only_near_identity_; }

 private:
  bool only_near_identity_;
};

class SizeError : public Error {
 public:
  explicit SizeError(const std::string& what) : Error("seam", what) {}
};

class EmptyProblemError : public Error {
 public:
  explicit EmptyProblemError(const std::string& what) : Error("blend", what) {}
};

class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& what) : Error("eval", what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, int line, const std::string& what)
      : Error("config", what), key_(key), line_(line) {}
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

}  // namespace mrstitch
