#include "faqpilot/error.hpp"

namespace faqpilot {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedDocument: return "malformed-document";
    case ErrorCode::SchemaViolation: return "schema-violation";
    case ErrorCode::EmptyTranscript: return "empty-transcript";
    case ErrorCode::EmptyText: return "empty-text";
    case ErrorCode::ZeroSize: return "zero-size";
    case ErrorCode::DimMismatch: return "dim-mismatch";
    case ErrorCode::ZeroVector: return "zero-vector";
    case ErrorCode::ProviderUnavailable: return "provider-unavailable";
    case ErrorCode::DeadlineExceeded: return "deadline-exceeded";
    case ErrorCode::ProviderError: return "provider-error";
    case ErrorCode::RateLimited: return "rate-limited";
    case ErrorCode::UnparseableOutput: return "unparseable-output";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::StorageIo: return "storage-io";
    case ErrorCode::VersionMismatch: return "version-mismatch";
    case ErrorCode::CorruptSnapshot: return "corrupt-snapshot";
    case ErrorCode::MalformedRow: return "malformed-row";
    case ErrorCode::UnknownSuggestion: return "unknown-suggestion";
    case ErrorCode::RagUnavailable: return "rag-unavailable";
    case ErrorCode::NotGenerated: return "not-generated";
    case ErrorCode::NotYetAnswered: return "not-yet-answered";
    case ErrorCode::UnknownSession: return "unknown-session";
    case ErrorCode::EmptyConversation: return "empty-conversation";
    case ErrorCode::BufferOverrun: return "buffer-overrun";
    case ErrorCode::Unauthenticated: return "unauthenticated";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::StageAborted: return "stage-aborted";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::InvalidConfig: return "invalid-config";
  }
  return "unknown";
}

}  // namespace faqpilot
