#include "http_client.hpp"

#include <algorithm>

#include <httplib.h>

#include "faqpilot/error.hpp"

namespace faqpilot::detail {

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::InvalidConfig, "endpoint needs a scheme: " + url);
  const auto path_start = url.find('/', scheme + 3);
  Endpoint ep;
  if (path_start == std::string::npos) {
    ep.base = url;
    ep.path = "/";
  } else {
    ep.base = url.substr(0, path_start);
    ep.path = url.substr(path_start);
  }
  return ep;
}

PostResult post_json_with_retry(const Endpoint& endpoint, const std::string& body,
                                const std::string& bearer, Duration budget, const RetryPolicy& policy,
                                const Clock& clock) {
  const Instant deadline = clock.now() + budget;
  PostResult result;
  Duration backoff = policy.base_backoff;

  for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
    const Duration remaining = deadline - clock.now();
    if (remaining <= Duration::zero()) {
      result.outcome = PostOutcome::DeadlineExceeded;
      return result;
    }
    ++result.attempts;

    httplib::Client client(endpoint.base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(remaining);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(remaining - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);

    auto res = client.Post(endpoint.path, headers, body, "application/json");
    bool retryable = false;
    if (!res) {
      result.outcome = clock.now() >= deadline ? PostOutcome::DeadlineExceeded : PostOutcome::Unavailable;
      retryable = result.outcome == PostOutcome::Unavailable;
    } else {
      result.response = HttpResponse{res->status, res->body};
      if (res->status >= 200 && res->status < 300) {
        result.outcome = PostOutcome::Ok;
        return result;
      }
      if (res->status == 429) {
        result.outcome = PostOutcome::RateLimited;
        retryable = true;
      } else if (res->status >= 500) {
        result.outcome = PostOutcome::Unavailable;
        retryable = true;
      } else {
        result.outcome = PostOutcome::HttpError;
      }
    }
    if (!retryable || attempt == policy.max_retries) return result;

    if (clock.now() + backoff >= deadline) {
      clock.sleep_until(deadline);
      result.outcome = PostOutcome::DeadlineExceeded;
      return result;
    }
    clock.sleep_for(backoff);
    backoff *= 2;
  }
  return result;
}

}  // namespace faqpilot::detail
