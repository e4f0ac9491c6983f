#include "faqpilot/llm_gateway.hpp"

#include <cctype>

#include <nlohmann/json.hpp>

#include "faqpilot/error.hpp"
#include "faqpilot/text.hpp"
#include "http_client.hpp"

namespace faqpilot {

namespace {
constexpr std::array<std::string_view, kRoleCount> kRoleNames = {
    "match", "generate", "extract", "critic", "summarize", "merge", "review"};

constexpr std::string_view kReprompt =
    "\n\nYour previous reply could not be parsed. Reply with a numbered list, one item per line, "
    "or the single word none.";
}  // namespace

std::string_view to_string(Role r) noexcept { return kRoleNames[static_cast<std::size_t>(r)]; }

Role parse_role(std::string_view name) {
  for (std::size_t i = 0; i < kRoleNames.size(); ++i) {
    if (kRoleNames[i] == name) return static_cast<Role>(i);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown role '" + std::string(name) + "'");
}

double default_temperature(Role r) noexcept {
  return (r == Role::Generate || r == Role::Extract || r == Role::Summarize) ? 0.3 : 0.0;
}

CompletionRequest make_request(Role role, std::string prompt, Duration deadline, PromptVars vars) {
  CompletionRequest req;
  req.prompt = std::move(prompt);
  req.role = role;
  req.temperature = default_temperature(role);
  req.deadline = deadline;
  req.vars = std::move(vars);
  return req;
}

ScriptedRule ScriptedRule::contains(std::string needle, std::string response) {
  return ScriptedRule{
      [needle = std::move(needle)](const CompletionRequest& r) {
        return r.prompt.find(needle) != std::string::npos;
      },
      [response = std::move(response)](const CompletionRequest&) { return response; }};
}

ScriptedRule ScriptedRule::for_role(Role role, std::function<std::string(const CompletionRequest&)> respond) {
  return ScriptedRule{[role](const CompletionRequest& r) { return r.role == role; }, std::move(respond)};
}

// ---------------------------------------------------------------------------

ScriptedProvider::ScriptedProvider(ScriptedBehavior behavior, std::shared_ptr<const Clock> clock)
    : behavior_(std::move(behavior)), clock_(std::move(clock)) {}

std::string ScriptedProvider::complete(const CompletionRequest& req) {
  calls_.fetch_add(1);
  if (behavior_.failure_mode == FailureMode::Timeout || behavior_.injected_latency > req.deadline) {
    clock_->sleep_for(req.deadline);
    throw Error(ErrorCode::DeadlineExceeded, "scripted provider exceeded the deadline");
  }
  clock_->sleep_for(behavior_.injected_latency);
  if (behavior_.failure_mode == FailureMode::Error) {
    throw Error(ErrorCode::ProviderError, "scripted provider failure");
  }
  if (behavior_.failure_mode == FailureMode::GarbageOutput) {
    return "%%## <unstructured> lorem ipsum ##%%";
  }
  for (const auto& rule : behavior_.rules) {
    if (rule.matcher && rule.matcher(req)) return rule.respond(req);
  }
  return behavior_.default_response;
}

// ---------------------------------------------------------------------------

RemoteChatProvider::RemoteChatProvider(ProviderSpec spec, std::shared_ptr<const Clock> clock)
    : spec_(std::move(spec)), clock_(std::move(clock)) {
  if (spec_.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "remote provider needs an endpoint");
}

std::string RemoteChatProvider::complete(const CompletionRequest& req) {
  nlohmann::json body = {
      {"model", spec_.model_id},
      {"prompt", req.prompt},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
      {"max_tokens", req.max_output_tokens},
      {"temperature", req.temperature},
  };
  const auto result = detail::post_json_with_retry(detail::parse_endpoint(spec_.endpoint), body.dump(),
                                                   spec_.credential, req.deadline, {}, *clock_);
  using detail::PostOutcome;
  switch (result.outcome) {
    case PostOutcome::Ok: break;
    case PostOutcome::DeadlineExceeded:
      throw Error(ErrorCode::DeadlineExceeded, "completion timed out");
    case PostOutcome::RateLimited:
      throw Error(ErrorCode::RateLimited, "provider rate limit persisted after retries");
    default:
      throw Error(ErrorCode::ProviderError,
                  "completion failed with status " + std::to_string(result.response.status));
  }
  try {
    const auto j = nlohmann::json::parse(result.response.body);
    if (j.contains("text")) return j.at("text").get<std::string>();
    if (j.contains("output")) return j.at("output").get<std::string>();
    const auto& choice = j.at("choices").at(0);
    if (choice.contains("message")) return choice.at("message").at("content").get<std::string>();
    return choice.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProviderError, std::string("bad completion payload: ") + e.what());
  }
}

std::shared_ptr<ChatProvider> make_provider(const ProviderSpec& spec, std::shared_ptr<const Clock> clock) {
  if (spec.kind == ProviderKind::Remote) return std::make_shared<RemoteChatProvider>(spec, std::move(clock));
  return std::make_shared<ScriptedProvider>(spec.script, std::move(clock));
}

// ---------------------------------------------------------------------------

namespace {

// Strips "12." / "12)" / "-" / "*" / bullet markers. Returns nullopt if the
// line carries no list marker.
std::optional<std::string_view> strip_marker(std::string_view line) {
  line = text::trim(line);
  if (line.empty()) return std::nullopt;
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0) {
    if (i < line.size() && (line[i] == '.' || line[i] == ')')) return text::trim(line.substr(i + 1));
    return std::nullopt;
  }
  if (line[0] == '-' || line[0] == '*') return text::trim(line.substr(1));
  constexpr std::string_view bullet = "\xE2\x80\xA2";
  if (line.substr(0, bullet.size()) == bullet) return text::trim(line.substr(bullet.size()));
  return std::nullopt;
}

bool is_none_sentinel(std::string_view s) {
  auto t = text::to_lower(text::trim(s));
  while (!t.empty() && (t.back() == '.' || t.back() == '!')) t.pop_back();
  return t == "none";
}

}  // namespace

std::optional<std::vector<std::string>> parse_list_output(std::string_view output, std::size_t n) {
  if (is_none_sentinel(output)) return std::vector<std::string>{};
  std::vector<std::string> items;
  bool saw_marker = false;
  for (const auto& line : text::split_lines(output)) {
    auto item = strip_marker(line);
    if (!item) continue;
    saw_marker = true;
    if (item->empty() || is_none_sentinel(*item)) continue;
    if (items.size() < n) items.emplace_back(*item);
  }
  if (!saw_marker) return std::nullopt;
  return items;
}

// ---------------------------------------------------------------------------

void LlmGateway::Limiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return in_use_ < capacity_; });
  ++in_use_;
}

void LlmGateway::Limiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_use_;
  }
  cv_.notify_one();
}

LlmGateway::LlmGateway(std::shared_ptr<ChatProvider> default_provider, std::shared_ptr<const Clock> clock,
                       std::size_t max_concurrency)
    : default_(std::move(default_provider)),
      clock_(std::move(clock)),
      limiter_(std::make_unique<Limiter>(std::max<std::size_t>(1, max_concurrency))) {
  if (!default_) throw Error(ErrorCode::InvalidConfig, "gateway needs a provider");
}

void LlmGateway::set_role_provider(Role role, std::shared_ptr<ChatProvider> provider) {
  by_role_[static_cast<std::size_t>(role)] = std::move(provider);
}

std::shared_ptr<ChatProvider> LlmGateway::provider_for(Role role) const {
  const auto& p = by_role_[static_cast<std::size_t>(role)];
  return p ? p : default_;
}

std::string LlmGateway::complete(const CompletionRequest& req) {
  if (text::is_blank(req.prompt)) throw Error(ErrorCode::InvalidArgument, "empty prompt");
  if (req.deadline <= Duration::zero()) throw Error(ErrorCode::DeadlineExceeded, "no time budget left");

  const Instant start = clock_->now();
  calls_[static_cast<std::size_t>(req.role)].fetch_add(1);
  auto provider = provider_for(req.role);

  limiter_->acquire();
  struct Release {
    Limiter* l;
    ~Release() { l->release(); }
  } release{limiter_.get()};

  CompletionRequest bounded = req;
  bounded.deadline = req.deadline - (clock_->now() - start);
  if (bounded.deadline <= Duration::zero()) throw Error(ErrorCode::DeadlineExceeded, "queued past deadline");

  std::string out = provider->complete(bounded);
  if (clock_->now() - start > req.deadline) {
    throw Error(ErrorCode::DeadlineExceeded, "completion arrived after the deadline");
  }
  return out;
}

std::vector<std::string> LlmGateway::complete_list(const CompletionRequest& req, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "list size must be >= 1");
  const Instant start = clock_->now();
  auto parsed = parse_list_output(complete(req), n);
  if (parsed) return *parsed;

  CompletionRequest retry = req;
  retry.prompt += kReprompt;
  retry.deadline = req.deadline - (clock_->now() - start);
  parsed = parse_list_output(complete(retry), n);
  if (parsed) return *parsed;
  throw Error(ErrorCode::UnparseableOutput, "model output is not a list after one reprompt");
}

std::uint64_t LlmGateway::calls() const noexcept {
  std::uint64_t total = 0;
  for (const auto& c : calls_) total += c.load();
  return total;
}

std::uint64_t LlmGateway::calls(Role role) const noexcept {
  return calls_[static_cast<std::size_t>(role)].load();
}

}  // namespace faqpilot
