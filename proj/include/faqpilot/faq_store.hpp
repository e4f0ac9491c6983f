#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "faqpilot/embedding.hpp"

namespace faqpilot {

enum class FaqSource { Mined, RuntimeTagged, Supervisor };

std::string_view to_string(FaqSource s) noexcept;
FaqSource parse_faq_source(std::string_view s);

struct FaqEntry {
  std::string qid;
  std::string question;
  std::optional<std::string> answer;
  std::uint64_t frequency = 0;
  FaqSource source = FaqSource::Supervisor;
  Vector embedding;
  std::int64_t created_at_ms = 0;
  std::int64_t updated_at_ms = 0;

  friend bool operator==(const FaqEntry&, const FaqEntry&) = default;
};

struct FaqMatch {
  std::string qid;
  std::string question;
  double score = 0.0;
};

/// Fields for an insert-or-update. Absent fields keep their current value on
/// update and take defaults on insert (frequency 0, source supervisor).
struct FaqUpsert {
  std::optional<std::string> qid;
  std::optional<std::string> question;  // required when inserting
  std::optional<std::string> answer;    // empty string means "no answer"
  bool clear_answer = false;
  std::optional<std::uint64_t> frequency;
  std::optional<FaqSource> source;
  std::optional<std::int64_t> created_at_ms;
  std::optional<std::int64_t> updated_at_ms;
};

struct TagResult {
  std::string qid;
  bool merged = false;  // true when an existing near-duplicate absorbed the question
};

struct RowError {
  std::size_t line = 0;
  std::string message;
};

struct ImportResult {
  std::size_t count = 0;
  std::vector<RowError> errors;
};

struct FaqPage {
  std::vector<FaqEntry> entries;
  std::size_t total = 0;
};

struct StoreConfig {
  std::size_t dim = 256;
  double dedup_threshold = 0.95;
  /// When set, every write is persisted here (write-temp-then-rename).
  std::optional<std::filesystem::path> snapshot_path;
  std::uint64_t id_seed = 0x5eed;
  std::function<std::int64_t()> now_ms;  // defaults to the system clock
};

inline constexpr std::uint32_t kSnapshotFormatVersion = 1;
inline constexpr std::string_view kCsvHeader = "qid,question,answer,frequency,source,created_at,updated_at";

/// Persistent FAQ database with exact cosine search over normalized
/// embeddings. Readers run concurrently; writers are serialized and never
/// observed half-applied.
class FaqStore {
 public:
  FaqStore(StoreConfig config, std::shared_ptr<const Embedder> embedder);

  /// In-memory copy (no snapshot path) for isolated experiments. A
  /// replacement embedder must produce the same vectors as the current one.
  [[nodiscard]] std::unique_ptr<FaqStore> clone(std::shared_ptr<const Embedder> embedder = nullptr) const;

  /// Creates a store and loads config.snapshot_path if that file exists.
  static std::unique_ptr<FaqStore> open(StoreConfig config, std::shared_ptr<const Embedder> embedder);

  /// Inserts or updates; re-embeds only when the question text changes.
  std::string upsert(const FaqUpsert& fields);
  bool remove(const std::string& qid);
  /// Throws not-found.
  [[nodiscard]] FaqEntry get(const std::string& qid) const;
  [[nodiscard]] std::optional<FaqEntry> find(const std::string& qid) const;

  /// Top-k by cosine >= min_score, score descending, ties by qid ascending.
  [[nodiscard]] std::vector<FaqMatch> search(const Vector& query, std::size_t k, double min_score = -1.0) const;

  /// Stores an agent-tagged question, or bumps the frequency of an existing
  /// entry whose cosine exceeds the dedup threshold.
  TagResult tag_runtime(const std::string& question, const std::string& answer);

  ImportResult import_csv(const std::filesystem::path& path);
  std::size_t export_csv(const std::filesystem::path& path) const;

  void persist(const std::filesystem::path& path) const;
  /// Replaces the contents with the snapshot. Throws corrupt-snapshot,
  /// version-mismatch, or dim-mismatch.
  void load(const std::filesystem::path& path);

  /// All entries ordered by qid.
  [[nodiscard]] std::vector<FaqEntry> entries() const;
  [[nodiscard]] FaqPage list(std::size_t offset, std::size_t limit, bool answerless_only) const;
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] const StoreConfig& config() const noexcept { return config_; }
  [[nodiscard]] const Embedder& embedder() const noexcept { return *embedder_; }

 private:
  std::int64_t now() const;
  std::string mint_qid(FaqSource source);
  void insert_locked(FaqEntry entry);
  void autopersist_locked() const;
  std::vector<FaqEntry> sorted_copy_locked() const;

  StoreConfig config_;
  std::shared_ptr<const Embedder> embedder_;
  mutable std::shared_mutex mu_;
  std::vector<FaqEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::mt19937_64 id_rng_;
};

}  // namespace faqpilot
