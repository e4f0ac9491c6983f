#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "faqpilot/clock.hpp"

namespace faqpilot {

enum class Role { Match, Generate, Extract, Critic, Summarize, Merge, Review };
inline constexpr std::size_t kRoleCount = 7;

std::string_view to_string(Role r) noexcept;
Role parse_role(std::string_view name);
/// 0.0 for selection roles (match, critic, merge, review), 0.3 for productive ones.
double default_temperature(Role r) noexcept;

/// Placeholder values a prompt was rendered from.
using PromptVars = std::map<std::string, std::string, std::less<>>;

struct CompletionRequest {
  std::string prompt;
  int max_output_tokens = 512;
  double temperature = 0.0;
  Duration deadline = std::chrono::seconds(2);
  Role role = Role::Generate;
  /// Scripted backends may answer from these instead of re-parsing the prompt.
  PromptVars vars;
};

/// Builds a request for `role` with the role's default temperature.
CompletionRequest make_request(Role role, std::string prompt, Duration deadline, PromptVars vars = {});

enum class FailureMode { Timeout, Error, GarbageOutput };

struct ScriptedRule {
  std::function<bool(const CompletionRequest&)> matcher;
  std::function<std::string(const CompletionRequest&)> respond;

  /// Matches when the prompt contains `needle` (case-sensitive).
  static ScriptedRule contains(std::string needle, std::string response);
  static ScriptedRule for_role(Role role, std::function<std::string(const CompletionRequest&)> respond);
};

/// Canned behaviour for offline runs. Rules are evaluated first-match-wins.
struct ScriptedBehavior {
  std::vector<ScriptedRule> rules;
  std::string default_response = "none";
  Duration injected_latency = Duration::zero();
  std::optional<FailureMode> failure_mode;
};

enum class ProviderKind { Remote, Scripted };

struct ProviderSpec {
  ProviderKind kind = ProviderKind::Scripted;
  std::string model_id = "scripted";
  std::string endpoint;    // remote
  std::string credential;  // remote; resolved secret, never logged
  ScriptedBehavior script; // scripted
  /// Concurrent in-flight completions allowed against this provider.
  std::size_t max_concurrency = 16;
};

/// One chat-completion backend. complete() must return (or throw
/// deadline-exceeded) no later than req.deadline after it was called.
class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  [[nodiscard]] virtual std::string complete(const CompletionRequest& req) = 0;
};

class ScriptedProvider final : public ChatProvider {
 public:
  explicit ScriptedProvider(ScriptedBehavior behavior, std::shared_ptr<const Clock> clock = steady_clock());

  std::string complete(const CompletionRequest& req) override;
  [[nodiscard]] std::uint64_t calls() const noexcept { return calls_.load(); }

 private:
  ScriptedBehavior behavior_;
  std::shared_ptr<const Clock> clock_;
  std::atomic<std::uint64_t> calls_{0};
};

/// Generic chat-completion HTTP adapter. Sends
/// {"model","prompt","messages","max_tokens","temperature"} and reads
/// "text", "output", or choices[0].message.content / choices[0].text.
class RemoteChatProvider final : public ChatProvider {
 public:
  explicit RemoteChatProvider(ProviderSpec spec, std::shared_ptr<const Clock> clock = steady_clock());
  std::string complete(const CompletionRequest& req) override;

 private:
  ProviderSpec spec_;
  std::shared_ptr<const Clock> clock_;
};

std::shared_ptr<ChatProvider> make_provider(const ProviderSpec& spec,
                                            std::shared_ptr<const Clock> clock = steady_clock());

/// Parses a numbered or bulleted list. Returns nullopt when the text is
/// neither a list nor the "none" sentinel. At most n items; blanks dropped.
std::optional<std::vector<std::string>> parse_list_output(std::string_view output, std::size_t n);

/// Provider-neutral front door: routes each role to a provider, enforces the
/// deadline, limits concurrency per provider, and counts calls per role.
class LlmGateway {
 public:
  explicit LlmGateway(std::shared_ptr<ChatProvider> default_provider,
                      std::shared_ptr<const Clock> clock = steady_clock(), std::size_t max_concurrency = 16);

  /// Routes `role` to a dedicated provider (e.g. separate match and generate models).
  void set_role_provider(Role role, std::shared_ptr<ChatProvider> provider);

  /// Throws invalid-argument for an empty prompt or non-positive deadline,
  /// deadline-exceeded when the answer arrives late.
  std::string complete(const CompletionRequest& req);

  /// complete() then parse_list_output(); one reprompt on unparseable output
  /// within the remaining deadline, then unparseable-output.
  std::vector<std::string> complete_list(const CompletionRequest& req, std::size_t n);

  [[nodiscard]] std::uint64_t calls() const noexcept;
  [[nodiscard]] std::uint64_t calls(Role role) const noexcept;
  [[nodiscard]] const Clock& clock() const noexcept { return *clock_; }
  [[nodiscard]] std::shared_ptr<const Clock> clock_ptr() const noexcept { return clock_; }

 private:
  class Limiter {
   public:
    explicit Limiter(std::size_t capacity) : capacity_(capacity) {}
    void acquire();
    void release();

   private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::size_t capacity_;
    std::size_t in_use_ = 0;
  };

  std::shared_ptr<ChatProvider> provider_for(Role role) const;

  std::shared_ptr<ChatProvider> default_;
  std::array<std::shared_ptr<ChatProvider>, kRoleCount> by_role_{};
  std::shared_ptr<const Clock> clock_;
  std::unique_ptr<Limiter> limiter_;
  std::array<std::atomic<std::uint64_t>, kRoleCount> calls_{};
};

}  // namespace faqpilot
