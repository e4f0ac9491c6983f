#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "faqpilot/conversation.hpp"
#include "faqpilot/embedding.hpp"
#include "faqpilot/faq_store.hpp"
#include "faqpilot/llm_gateway.hpp"
#include "faqpilot/prompts.hpp"
#include "faqpilot/rag_client.hpp"

namespace faqpilot {

struct RawQuestion {
  std::string text;
  std::string call_id;
  std::size_t turn_index = 0;

  friend bool operator==(const RawQuestion&, const RawQuestion&) = default;
};

struct FilteredQuestion {
  std::string text;
  std::string call_id;

  friend bool operator==(const FilteredQuestion&, const FilteredQuestion&) = default;
};

struct ClusterAssignment {
  std::size_t cluster_id = 0;
  std::vector<FilteredQuestion> members;
  Vector centroid;  // empty when the clusters were restored from the stage cache
};

struct Representative {
  std::string qid;
  std::string text;
  std::uint64_t frequency = 0;
  std::vector<std::string> member_qids;

  friend bool operator==(const Representative&, const Representative&) = default;
};

struct MiningConfig {
  std::size_t k = 85;
  std::size_t critic_batch = 30;
  std::size_t top_n = 100;
  std::size_t kmeans_max_iter = 100;
  std::uint64_t kmeans_seed = 0;
  std::size_t kmeans_n_init = 1;
  std::optional<std::filesystem::path> cache_dir;
  bool review_enabled = true;

  std::size_t concurrency = 8;
  Duration llm_deadline = std::chrono::seconds(60);
  Duration rag_deadline = std::chrono::seconds(10);
  /// Fraction of calls whose extraction may fail before the run aborts.
  double extract_failure_limit = 0.2;
  /// Transcripts longer than this are extracted in chunks of whole turns.
  std::size_t max_transcript_chars = 24000;

  /// Throws invalid-config.
  void validate() const;
};

/// Gateway, prompts and a sink for warnings shared by the LLM stages.
struct StageContext {
  LlmGateway& gateway;
  const PromptLibrary& prompts;
  const MiningConfig& config;
  std::vector<std::string>* warnings = nullptr;

  void warn(std::string message) const;
};

std::vector<RawQuestion> extract_questions(const std::vector<Conversation>& transcripts, const StageContext& ctx);

/// Returns the kept questions; `batches` receives the number of critic calls planned.
std::vector<FilteredQuestion> critic_filter(const std::vector<RawQuestion>& raw, const StageContext& ctx,
                                            std::size_t* batches = nullptr);

std::vector<ClusterAssignment> cluster_questions(const std::vector<FilteredQuestion>& filtered,
                                                 const Embedder& embedder, const MiningConfig& config,
                                                 std::vector<std::string>* warnings = nullptr);

/// Most frequent verbatim member; ties go to the earliest occurrence.
std::string most_frequent_member(const std::vector<FilteredQuestion>& members);

Representative summarize_cluster(const ClusterAssignment& cluster, const std::string& qid, const StageContext& ctx);

/// Shared by merge and review: asks `role` for merge groups and applies them.
std::vector<Representative> merge_representatives(const std::vector<Representative>& reps, const StageContext& ctx,
                                                  Role role = Role::Merge);

/// Collapses each valid group. A group is ignored when it names an unknown
/// qid, fewer than two qids, or a qid already claimed by an earlier group.
std::vector<Representative> apply_merge_groups(const std::vector<Representative>& reps,
                                               const std::vector<std::vector<std::string>>& groups,
                                               std::vector<std::string>* warnings = nullptr);

/// True when `after` conserves total frequency and keeps at least half of `before`.
bool review_acceptable(const std::vector<Representative>& before, const std::vector<Representative>& after);

struct ReviewOutcome {
  std::vector<Representative> reps;
  bool skipped = false;
  bool discarded = false;
};

ReviewOutcome final_review(const std::vector<Representative>& merged, const StageContext& ctx, bool enabled);

std::vector<Representative> select_top(std::vector<Representative> reps, std::size_t n);

struct BackfillResult {
  std::size_t stored = 0;
  std::size_t answered = 0;
  std::vector<std::pair<std::string, std::optional<std::string>>> answers;  // qid -> answer
};

BackfillResult backfill_answers(const std::vector<Representative>& reps, RagClient& rag, FaqStore& store,
                                Duration deadline = std::chrono::seconds(10),
                                std::vector<std::string>* warnings = nullptr);

/// Per-stage outputs on disk, keyed by stage name and a content hash of the
/// stage inputs plus the relevant config. Writes are atomic.
class StageCache {
 public:
  explicit StageCache(std::filesystem::path dir);

  [[nodiscard]] std::filesystem::path path_for(std::string_view stage, std::uint64_t key) const;
  [[nodiscard]] std::optional<std::string> get(std::string_view stage, std::uint64_t key) const;
  std::filesystem::path put(std::string_view stage, std::uint64_t key, std::string_view contents) const;

 private:
  std::filesystem::path dir_;
};

/// CSV encodings used by the stage cache.
std::string encode_raw(const std::vector<RawQuestion>& v);
std::vector<RawQuestion> decode_raw(std::string_view csv);
std::string encode_filtered(const std::vector<FilteredQuestion>& v);
std::vector<FilteredQuestion> decode_filtered(std::string_view csv);
std::string encode_clusters(const std::vector<ClusterAssignment>& v);
std::vector<ClusterAssignment> decode_clusters(std::string_view csv);
/// `qid,text,frequency` when with_members is false, else `qid,text,frequency,member_qids`.
std::string encode_reps(const std::vector<Representative>& v, bool with_members);
std::vector<Representative> decode_reps(std::string_view csv);

struct StageReport {
  std::string name;
  std::size_t input_count = 0;
  std::size_t output_count = 0;
  std::uint64_t frequency_total = 0;
  bool cache_hit = false;
  bool skipped = false;
  bool discarded = false;
  double elapsed_ms = 0.0;
  std::uint64_t llm_calls = 0;
  std::uint64_t rag_calls = 0;
  std::vector<std::string> warnings;
  std::string output_file;
};

struct MiningReport {
  std::vector<StageReport> stages;
  std::size_t transcripts = 0;
  std::size_t effective_k = 0;
  std::size_t critic_batches = 0;
  std::vector<Representative> top;
  std::size_t stored = 0;
  std::size_t answered = 0;

  [[nodiscard]] const StageReport* stage(std::string_view name) const;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Runs extract, critic, cluster, summarize, merge, review, select and
/// backfill in order. With config.cache_dir set, a stage whose input hash is
/// unchanged is restored from disk without gateway or RAG calls.
MiningReport run_pipeline(const std::vector<Conversation>& transcripts, const MiningConfig& config,
                          LlmGateway& gateway, const PromptLibrary& prompts, const Embedder& embedder,
                          RagClient& rag, FaqStore& store);

void write_report(const std::filesystem::path& path, const MiningReport& report);

}  // namespace faqpilot
