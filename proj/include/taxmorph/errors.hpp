// Exception hierarchy. Every error the CLI maps to exit code 2 derives from
// InputError; evaluation-time failures derive from EvaluationError.
#pragma once

#include <stdexcept>
#include <string>

namespace taxmorph {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

/// A document violates the schema at a precise field path.
class SchemaViolation : public InputError {
 public:
  SchemaViolation(std::string path, std::string reason)
      : InputError(path + ": " + reason), path_(std::move(path)), reason_(std::move(reason)) {}

  const std::string& path() const { return path_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

/// The document is not well-formed structured text.
class MalformedDocument : public InputError {
 public:
  using InputError::InputError;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class UnknownStatus : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

class MissingRuleSection : public EvaluationError {
 public:
  explicit MissingRuleSection(const std::string& section)
      : EvaluationError("rule document has no '" + section + "' section") {}
};

class AgeOutOfTable : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

class UnknownDistributionCode : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

/// Two profiles differ on a label outside the relation's equivalence set.
class NotEquivalent : public Error {
 public:
  using Error::Error;
};

class PreconditionViolated : public Error {
 public:
  using Error::Error;
};

class NoThresholds : public Error {
 public:
  using Error::Error;
};

class CandidateUnavailable : public Error {
 public:
  using Error::Error;
};

class GeneratorUnavailable : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public InputError {
 public:
  using InputError::InputError;
};

class InapplicableOperator : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace taxmorph
