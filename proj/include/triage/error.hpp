#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace triage {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  ZeroNorm,
  NonFiniteValue,
  DuplicateId,
  ChecksumMismatch,
  RecordCountMismatch,
  EmptyCorpus,
  EmptyQuerySet,
  DegenerateLabelSet,
  UnknownLabel,
  UnknownText,
  AllGroupsMasked,
  RuleCoverageGap,
  DegenerateLabels,
  EmptySweep,
  BackendUnavailable,
  BackendError,
  Io,
  Parse,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ZeroNorm: return "ZeroNorm";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::RecordCountMismatch: return "RecordCountMismatch";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::EmptyQuerySet: return "EmptyQuerySet";
    case ErrorKind::DegenerateLabelSet: return "DegenerateLabelSet";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::UnknownText: return "UnknownText";
    case ErrorKind::AllGroupsMasked: return "AllGroupsMasked";
    case ErrorKind::RuleCoverageGap: return "RuleCoverageGap";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::EmptySweep: return "EmptySweep";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::BackendError: return "BackendError";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

/// Every failure raised by the library. `subject()` names the offending
/// record, path, group or sample when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string subject = {})
      : std::runtime_error(format(kind, message, subject)),
        kind_(kind),
        message_(message),
        subject_(std::move(subject)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& subject() const noexcept { return subject_; }
  const std::string& message() const noexcept { return message_; }

 private:
  static std::string format(ErrorKind kind, const std::string& message,
                            const std::string& subject) {
    std::string out(to_string(kind));
    if (!subject.empty()) out += "(" + subject + ")";
    if (!message.empty()) out += ": " + message;
    return out;
  }

  ErrorKind kind_;
  std::string message_;
  std::string subject_;
};

}  // namespace triage
