#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace faqpilot {

enum class Speaker { Agent, Customer };

std::string_view to_string(Speaker s) noexcept;
/// Case-insensitive; anything other than agent/customer is a schema-violation.
Speaker parse_speaker(std::string_view label);

struct Turn {
  std::size_t index = 0;
  Speaker speaker = Speaker::Customer;
  std::string text;
  std::optional<std::int64_t> timestamp_ms;

  friend bool operator==(const Turn&, const Turn&) = default;
};

/// Immutable-by-convention snapshot of one call. Turns are sorted by index
/// and indices run 0..n-1 without gaps.
struct Conversation {
  std::string id;
  std::vector<Turn> turns;

  [[nodiscard]] bool empty() const noexcept { return turns.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return turns.size(); }
  /// Index of the last turn; undefined on an empty conversation.
  [[nodiscard]] std::size_t last_index() const noexcept { return turns.back().index; }

  friend bool operator==(const Conversation&, const Conversation&) = default;
};

/// The most recent turns of a conversation, in source order.
struct TurnWindow {
  std::vector<Turn> turns;
  std::size_t start_index = 0;
  std::size_t end_index = 0;

  [[nodiscard]] std::size_t size() const noexcept { return turns.size(); }
  /// "Customer: ...\nAgent: ..." rendering used in prompts and for embedding.
  [[nodiscard]] std::string text() const;
  /// Only the customer utterances, in order.
  [[nodiscard]] std::vector<std::string> customer_utterances() const;
};

inline constexpr std::size_t kDefaultWindowSize = 6;

/// Parses a line-delimited transcript document holding exactly one call.
Conversation parse_transcript(std::string_view document);
/// Parses a document that may hold many calls; calls are returned in order of
/// first appearance of their call_id.
std::vector<Conversation> parse_transcripts(std::string_view document);
std::vector<Conversation> parse_transcripts(std::istream& in);
/// Reads a transcript file, or every *.jsonl file (sorted by name) in a directory.
std::vector<Conversation> load_transcripts(const std::filesystem::path& path);

void write_transcript(std::ostream& out, const Conversation& conv);
std::string serialize_transcript(const Conversation& conv);
void save_transcripts(const std::filesystem::path& path, const std::vector<Conversation>& convs);

Conversation append_turn(const Conversation& conv, Speaker speaker, std::string_view text,
                         std::optional<std::int64_t> timestamp_ms = std::nullopt);

/// Last min(size, n) turns. size must be >= 1.
TurnWindow window(const Conversation& conv, std::size_t size);

}  // namespace faqpilot
