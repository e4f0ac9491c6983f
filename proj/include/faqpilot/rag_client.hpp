#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faqpilot/clock.hpp"
#include "faqpilot/llm_gateway.hpp"

namespace faqpilot {

struct RagRequest {
  std::string question;
  std::optional<std::string> context_hint;
  Duration deadline = std::chrono::seconds(2);
};

struct RagAnswer {
  std::string text;
  std::vector<std::string> source_refs;
  Duration latency = Duration::zero();
};

struct RagCallCounter {
  std::uint64_t calls_made = 0;
  std::uint64_t calls_bypassed = 0;
};

/// The external answer pipeline. Implementations throw deadline-exceeded or
/// rag-unavailable.
class RagBackend {
 public:
  virtual ~RagBackend() = default;
  [[nodiscard]] virtual RagAnswer answer(const RagRequest& req) = 0;
};

struct ScriptedRagRule {
  std::string pattern;  // case-insensitive substring of the question
  std::string answer;
  std::vector<std::string> source_refs;
};

struct ScriptedRagBehavior {
  std::vector<ScriptedRagRule> rules;
  /// Used when no rule matches; "{{question}}" is replaced by the question.
  /// nullopt makes unmatched questions fail with rag-unavailable.
  std::optional<std::string> default_answer = std::string("Knowledge-base answer: {{question}}");
  Duration injected_latency = Duration::zero();
  std::optional<FailureMode> failure_mode;
};

class ScriptedRagBackend final : public RagBackend {
 public:
  explicit ScriptedRagBackend(ScriptedRagBehavior behavior, std::shared_ptr<const Clock> clock = steady_clock());
  RagAnswer answer(const RagRequest& req) override;

 private:
  ScriptedRagBehavior behavior_;
  std::shared_ptr<const Clock> clock_;
};

/// POSTs {"question","context_hint"}; expects {"answer","source_refs"}.
class RemoteRagBackend final : public RagBackend {
 public:
  RemoteRagBackend(std::string endpoint, std::string credential, std::shared_ptr<const Clock> clock = steady_clock());
  RagAnswer answer(const RagRequest& req) override;

 private:
  std::string endpoint_;
  std::string credential_;
  std::shared_ptr<const Clock> clock_;
};

/// Client front for the RAG pipeline and the authoritative cost ledger.
class RagClient {
 public:
  explicit RagClient(std::shared_ptr<RagBackend> backend, std::shared_ptr<const Clock> clock = steady_clock());

  /// Counts one call per invocation regardless of backend retries.
  RagAnswer retrieve(const RagRequest& req);
  void record_bypass() noexcept { bypassed_.fetch_add(1); }

  [[nodiscard]] RagCallCounter counters() const noexcept { return {made_.load(), bypassed_.load()}; }
  [[nodiscard]] const Clock& clock() const noexcept { return *clock_; }

 private:
  std::shared_ptr<RagBackend> backend_;
  std::shared_ptr<const Clock> clock_;
  std::atomic<std::uint64_t> made_{0};
  std::atomic<std::uint64_t> bypassed_{0};
};

}  // namespace faqpilot
