#pragma once

// Minimal JSON-over-HTTP POST with bounded retries, shared by the remote
// embedder, chat-completion and RAG backends. Not part of the public API.

#include <optional>
#include <string>

#include "faqpilot/clock.hpp"

namespace faqpilot::detail {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // begins with '/'
};

Endpoint parse_endpoint(const std::string& url);

struct HttpResponse {
  int status = 0;
  std::string body;
};

struct RetryPolicy {
  int max_retries = 2;
  Duration base_backoff = std::chrono::milliseconds(100);
};

enum class PostOutcome { Ok, DeadlineExceeded, Unavailable, RateLimited, HttpError };

struct PostResult {
  PostOutcome outcome = PostOutcome::Unavailable;
  HttpResponse response;
  int attempts = 0;
};

/// POSTs `body` until a non-retryable answer arrives, retries run out, or the
/// deadline passes. 429 and 5xx and connection failures are retried.
PostResult post_json_with_retry(const Endpoint& endpoint, const std::string& body,
                                const std::string& bearer, Duration budget, const RetryPolicy& policy,
                                const Clock& clock);

}  // namespace faqpilot::detail
