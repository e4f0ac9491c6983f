#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace faqpilot {

enum class ErrorCode {
  // conversation
  MalformedDocument,
  SchemaViolation,
  EmptyTranscript,
  EmptyText,
  ZeroSize,
  // embedding / vectors
  DimMismatch,
  ZeroVector,
  ProviderUnavailable,
  DeadlineExceeded,
  // llm gateway
  ProviderError,
  RateLimited,
  UnparseableOutput,
  // store
  NotFound,
  StorageIo,
  VersionMismatch,
  CorruptSnapshot,
  MalformedRow,
  // engine / service
  UnknownSuggestion,
  RagUnavailable,
  NotGenerated,
  NotYetAnswered,
  UnknownSession,
  EmptyConversation,
  BufferOverrun,
  Unauthenticated,
  // mining
  Infeasible,
  StageAborted,
  // general
  InvalidArgument,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code. Every failure raised by the
/// library is an Error so callers can branch on code() instead of message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace faqpilot
