#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faqpilot/clock.hpp"
#include "faqpilot/conversation.hpp"
#include "faqpilot/embedding.hpp"
#include "faqpilot/faq_store.hpp"
#include "faqpilot/llm_gateway.hpp"
#include "faqpilot/prompts.hpp"
#include "faqpilot/rag_client.hpp"

namespace faqpilot {

enum class TriggerMode { Auto, Manual };
enum class MatchStrategy { VectorOnly, LlmRerank };

std::string_view to_string(MatchStrategy s) noexcept;
MatchStrategy parse_match_strategy(std::string_view s);

inline constexpr std::size_t kStageQuota = 3;  // per source: three matched, three generated

struct EngineConfig {
  std::size_t window_size = kDefaultWindowSize;
  std::size_t trigger_interval = 4;
  Duration deadline = std::chrono::seconds(2);
  std::size_t match_shortlist = 20;
  double match_min_score = 0.55;
  double dedup_threshold = 0.90;
  MatchStrategy match_strategy = MatchStrategy::LlmRerank;
  /// false forces match then generate sequentially, each with its own
  /// deadline. Only meant for latency baselines.
  bool parallel_stages = true;

  /// Throws invalid-config.
  void validate() const;
};

struct AnsweredQuestion {
  std::string text;
  Vector embedding;
};

enum class SuggestionSource { Matched, Generated };
std::string_view to_string(SuggestionSource s) noexcept;

struct Suggestion {
  std::string id;  // unique within the session, so stale ids are detectable
  std::string text;
  SuggestionSource source = SuggestionSource::Generated;
  std::string qid;     // matched only
  double score = 0.0;  // matched only: cosine from the vector scan
  std::size_t rank = 0;  // 1-based within its source
  Vector embedding;
};

struct StageLatency {
  Duration match = Duration::zero();
  Duration generate = Duration::zero();
};

struct SuggestionSet {
  std::string session_id;
  std::uint64_t round = 0;
  std::size_t trigger_turn_index = 0;
  std::vector<Suggestion> suggestions;  // matched first, then generated
  std::int64_t produced_at_ms = 0;
  StageLatency stage_latency;
  Duration total_latency = Duration::zero();
  bool match_degraded = false;
  bool generate_degraded = false;

  [[nodiscard]] bool degraded() const noexcept { return match_degraded || generate_degraded; }
  [[nodiscard]] std::size_t count(SuggestionSource s) const noexcept;
  [[nodiscard]] const Suggestion* find(const std::string& id) const noexcept;
};

enum class AnswerSource { Faq, Rag };
std::string_view to_string(AnswerSource s) noexcept;

struct Answer {
  std::string text;
  AnswerSource source = AnswerSource::Rag;
  std::string qid;  // set for answers served from or backfilled into the FAQ store
  Duration latency = Duration::zero();
  std::vector<std::string> source_refs;
};

struct AnsweredSuggestion {
  Suggestion suggestion;
  std::string answer;
};

/// Live-call state. One owner serializes all mutations.
struct Session {
  std::string id;
  Conversation conversation;
  std::vector<AnsweredQuestion> answered;
  std::optional<std::size_t> last_trigger_index;
  std::optional<SuggestionSet> active_set;
  EngineConfig config;
  std::uint64_t rounds_started = 0;
  std::map<std::string, AnsweredSuggestion> selected;  // by suggestion id
};

/// Everything a round needs, captured from the session at trigger time so the
/// stages can run without touching the session.
struct RoundInput {
  std::string session_id;
  std::uint64_t round = 0;
  std::size_t trigger_turn_index = 0;
  std::string window_text;
  std::vector<std::string> customer_utterances;
  std::vector<AnsweredQuestion> answered;
  EngineConfig config;
};

struct StageResult {
  std::vector<Suggestion> suggestions;
  Duration latency = Duration::zero();
  bool degraded = false;
  std::string error;
};

struct LedgerSnapshot {
  std::uint64_t sets_produced = 0;
  std::uint64_t matched_suggested = 0;
  std::uint64_t generated_suggested = 0;
  std::uint64_t faq_selections = 0;             // matched, answered from the store
  std::uint64_t answerless_matched_selections = 0;  // matched, answer fetched via RAG
  std::uint64_t generated_selections = 0;
  std::uint64_t degraded_rounds = 0;
  std::uint64_t tags = 0;

  [[nodiscard]] std::uint64_t matched_selections() const noexcept {
    return faq_selections + answerless_matched_selections;
  }
};

struct EngineDeps {
  std::shared_ptr<FaqStore> store;
  std::shared_ptr<LlmGateway> gateway;
  std::shared_ptr<RagClient> rag;
  std::shared_ptr<const PromptLibrary> prompts;
  std::shared_ptr<const Clock> clock;  // defaults to the gateway's clock
};

/// Orchestrates suggestion rounds: rolling-window trigger, concurrent
/// Match + Generate under a deadline, merge with suppression and dedup, and
/// answer routing between the FAQ store and RAG.
class SuggestionEngine {
 public:
  explicit SuggestionEngine(EngineDeps deps);

  Session new_session(std::string id, EngineConfig config) const;

  /// Manual: always. Auto: the interval has elapsed since the last trigger,
  /// or (never triggered) the last index reached interval - 1.
  [[nodiscard]] static bool should_trigger(const Session& session, TriggerMode mode);

  /// Records the trigger in the session and captures the round input.
  /// Throws empty-conversation.
  RoundInput begin_round(Session& session) const;
  /// Runs both stages and merges. Never throws for stage failures.
  SuggestionSet run_round(const RoundInput& input) const;
  /// Replaces the active set unless a newer round is already installed.
  /// Returns the set as installed (after answered-question pruning).
  const SuggestionSet& install(Session& session, SuggestionSet set) const;

  /// begin_round + run_round + install. In auto mode the trigger must be due.
  SuggestionSet suggest(Session& session, TriggerMode mode) const;

  StageResult match_stage(const RoundInput& input, Instant deadline_at) const;
  StageResult generate_stage(const RoundInput& input, Instant deadline_at) const;

  /// Resolves the answer for an active suggestion. Throws unknown-suggestion,
  /// rag-unavailable.
  Answer select(Session& session, const std::string& suggestion_id) const;
  /// Stores an answered generated suggestion as a runtime FAQ. Uses the
  /// answer from select() unless `answer` is given.
  TagResult tag_as_faq(Session& session, const std::string& suggestion_id,
                       std::optional<std::string> answer = std::nullopt) const;
  void mark_answered(Session& session, const std::string& question) const;

  [[nodiscard]] LedgerSnapshot ledger() const noexcept;
  [[nodiscard]] FaqStore& store() const noexcept { return *deps_.store; }
  [[nodiscard]] RagClient& rag() const noexcept { return *deps_.rag; }
  [[nodiscard]] const Clock& clock() const noexcept { return *deps_.clock; }

 private:
  bool near_answered(const Vector& v, const std::vector<AnsweredQuestion>& answered, double threshold) const;
  std::vector<FaqMatch> candidates(const RoundInput& input, std::size_t k, double min_score) const;

  EngineDeps deps_;
  struct Counters {
    std::atomic<std::uint64_t> sets{0}, matched_suggested{0}, generated_suggested{0}, faq{0}, answerless{0},
        generated{0}, degraded{0}, tags{0};
  };
  std::unique_ptr<Counters> counters_ = std::make_unique<Counters>();
};

}  // namespace faqpilot
