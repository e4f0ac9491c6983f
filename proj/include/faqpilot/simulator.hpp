#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faqpilot/clock.hpp"
#include "faqpilot/conversation.hpp"
#include "faqpilot/faq_store.hpp"
#include "faqpilot/suggestion_engine.hpp"

namespace faqpilot {

enum class SelectionRule { AlwaysFirstMatched, AlwaysFirstGenerated, PreferMatchedElseGenerated, Random, None };
std::string_view to_string(SelectionRule r) noexcept;
SelectionRule parse_selection_rule(std::string_view s);

enum class TriggerPlan { Auto, EveryK, ManualAt };

struct ReplayPolicy {
  SelectionRule selection = SelectionRule::PreferMatchedElseGenerated;
  std::uint64_t seed = 0;  // random selection only
  TriggerPlan trigger = TriggerPlan::Auto;
  std::size_t every_k = 4;
  std::vector<std::size_t> manual_at;  // turn indices
};

/// "auto", "every:K", or "manual:I,J,...".
ReplayPolicy parse_trigger_plan(std::string_view s, ReplayPolicy base = {});

/// Nearest-rank percentiles over per-round latencies.
struct LatencySummary {
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
  std::size_t samples = 0;
  friend bool operator==(const LatencySummary&, const LatencySummary&) = default;
};

/// Nearest-rank percentile (p in (0, 100]) of unsorted samples; 0 when empty.
double nearest_rank(std::vector<double> samples, double p);
LatencySummary summarize_latency(const std::vector<double>& samples_ms);

struct ReplayMetrics {
  std::uint64_t runs = 0;
  std::uint64_t suggestion_sets = 0;
  std::uint64_t matched_suggested = 0;
  std::uint64_t generated_suggested = 0;
  std::uint64_t faq_selected = 0;         // matched, answered from the store
  std::uint64_t answerless_selected = 0;  // matched, answered via RAG
  std::uint64_t generated_selected = 0;
  std::uint64_t rag_calls_made = 0;
  std::uint64_t rag_calls_bypassed = 0;
  std::uint64_t rag_failures = 0;
  std::uint64_t degraded = 0;
  /// Rounds that broke a suggestion-set invariant. Expected to stay 0.
  std::uint64_t invariant_violations = 0;
  LatencySummary match_latency;
  LatencySummary generate_latency;
  LatencySummary end_to_end;

  [[nodiscard]] std::uint64_t matched_selected() const noexcept { return faq_selected + answerless_selected; }
  friend bool operator==(const ReplayMetrics&, const ReplayMetrics&) = default;
};

/// Scripted latencies and matching approach for one side of a comparison.
struct StrategyProfile {
  std::string label;
  MatchStrategy match_strategy = MatchStrategy::LlmRerank;
  Duration llm_latency = Duration::zero();
  Duration embed_latency = Duration::zero();
  Duration rag_latency = Duration::zero();
  bool parallel_stages = true;
  /// Overrides the engine deadline, e.g. to give a slow serial baseline room.
  std::optional<Duration> deadline;
};

/// "label:strategy:llm_ms[:rag_ms[:serial|parallel[:deadline_ms]]]",
/// e.g. "baseline:llm_rerank:2500:0:serial:3000".
StrategyProfile parse_profile(std::string_view s);

struct ReplayOptions {
  std::size_t repetitions = 1;
  /// Simulated time makes latencies, and hence reports, reproducible.
  bool virtual_time = true;
  /// Concurrent replays of distinct (transcript, repetition) pairs.
  std::size_t parallelism = 1;
};

/// Embedder decorator that charges a fixed latency per call on `clock`.
class LatentEmbedder final : public Embedder {
 public:
  LatentEmbedder(std::shared_ptr<const Embedder> inner, Duration latency, std::shared_ptr<const Clock> clock);
  [[nodiscard]] std::size_t dim() const noexcept override { return inner_->dim(); }
  [[nodiscard]] Vector embed(std::string_view text) const override;
  [[nodiscard]] std::vector<Vector> embed_batch(const std::vector<std::string>& texts) const override;

 private:
  std::shared_ptr<const Embedder> inner_;
  Duration latency_;
  std::shared_ptr<const Clock> clock_;
};

/// Replays each transcript turn by turn against a private copy of `store`
/// with scripted providers. Deterministic for fixed seeds.
ReplayMetrics replay(const std::vector<Conversation>& transcripts, const FaqStore& store, const EngineConfig& config,
                     const ReplayPolicy& policy, const StrategyProfile& profile, const ReplayOptions& options);

struct ProfileResult {
  StrategyProfile profile;
  ReplayMetrics metrics;
};

/// Requires at least two profiles with distinct labels.
std::vector<ProfileResult> compare_strategies(const std::vector<Conversation>& transcripts, const FaqStore& store,
                                              const EngineConfig& config, const ReplayPolicy& policy,
                                              const std::vector<StrategyProfile>& profiles,
                                              const ReplayOptions& options);

/// The three approaches whose latencies the comparison is meant to order.
std::vector<StrategyProfile> default_profiles();

enum class ReportFormat { Csv, Table };
ReportFormat parse_report_format(std::string_view s);

inline constexpr std::string_view kReportCsvHeader =
    "profile,runs,sets,matched_suggested,generated_suggested,matched_selected,generated_selected,rag_calls,"
    "rag_bypassed,p50_ms,p95_ms,max_ms,degraded";

void write_report(std::ostream& out, const std::vector<ProfileResult>& rows, ReportFormat format);
/// Throws storage-io.
void emit_report(const std::filesystem::path& path, const std::vector<ProfileResult>& rows, ReportFormat format);

}  // namespace faqpilot
