#pragma once

#include <chrono>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace c4mas {

enum class ErrorCode {
  ParseError,
  InvalidBrief,
  InvalidArtifact,
  TurnIndexGap,
  DuplicateArtifact,
  MissingPrerequisite,
  BackendUnavailable,
  RateLimited,
  MalformedResponse,
  FixtureMissing,
  ValidationExhausted,
  YamlSyntaxError,
  SchemaError,
  DanglingReference,
  DuplicateAlias,
  PumlSyntaxError,
  UnbalancedBoundary,
  MissingStartTag,
  RunnerNotFound,
  JudgeUnavailable,
  ConfigError,
  RunStoreError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidBrief: return "InvalidBrief";
    case ErrorCode::InvalidArtifact: return "InvalidArtifact";
    case ErrorCode::TurnIndexGap: return "TurnIndexGap";
    case ErrorCode::DuplicateArtifact: return "DuplicateArtifact";
    case ErrorCode::MissingPrerequisite: return "MissingPrerequisite";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::FixtureMissing: return "FixtureMissing";
    case ErrorCode::ValidationExhausted: return "ValidationExhausted";
    case ErrorCode::YamlSyntaxError: return "YamlSyntaxError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::DuplicateAlias: return "DuplicateAlias";
    case ErrorCode::PumlSyntaxError: return "PumlSyntaxError";
    case ErrorCode::UnbalancedBoundary: return "UnbalancedBoundary";
    case ErrorCode::MissingStartTag: return "MissingStartTag";
    case ErrorCode::RunnerNotFound: return "RunnerNotFound";
    case ErrorCode::JudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::RunStoreError: return "RunStoreError";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library. `subject()` carries
/// the offending field, alias, key or path when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string subject = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        subject_(std::move(subject)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

class RateLimited : public Error {
 public:
  RateLimited(std::string message, std::chrono::milliseconds retry_after)
      : Error(ErrorCode::RateLimited, std::move(message)), retry_after_(retry_after) {}

  std::chrono::milliseconds retry_after() const noexcept { return retry_after_; }

 private:
  std::chrono::milliseconds retry_after_;
};

class BackendUnavailable : public Error {
 public:
  BackendUnavailable(std::string message, bool transient)
      : Error(ErrorCode::BackendUnavailable, std::move(message)), transient_(transient) {}

  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

/// Raised by complete_validated when no attempt passed the validator. Holds the
/// last completion text and one diagnostic per attempt.
class ValidationExhausted : public Error {
 public:
  ValidationExhausted(std::string last_text, std::vector<std::string> diagnostics)
      : Error(ErrorCode::ValidationExhausted,
              std::to_string(diagnostics.size()) + " attempt(s) failed validation" +
                  (diagnostics.empty() ? std::string() : "; last: " + diagnostics.back())),
        last_text_(std::move(last_text)),
        diagnostics_(std::move(diagnostics)) {}

  const std::string& last_text() const noexcept { return last_text_; }
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string last_text_;
  std::vector<std::string> diagnostics_;
};

}  // namespace c4mas
