#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "faqpilot/conversation.hpp"

namespace faqpilot {

struct PlantedIntent {
  std::string question;
  std::size_t target_frequency = 0;
};

struct CorpusSpec {
  std::size_t num_calls = 500;
  std::vector<PlantedIntent> intents;
  /// Probability that a call carries greeting and verification questions.
  double noise_rate = 0.3;
  std::size_t max_questions_per_call = 3;
};

/// Deterministic synthetic transcripts. Each intent is asked exactly
/// target_frequency times across the corpus, with filler, casing and
/// punctuation jitter. Throws infeasible when the intents cannot fit.
std::vector<Conversation> synth_corpus(const CorpusSpec& spec, std::uint64_t seed);

/// Twenty intents with well-separated frequencies (1,022 occurrences).
std::vector<PlantedIntent> default_intents();

/// `question,frequency` CSV with a header row.
std::vector<PlantedIntent> load_intents(const std::filesystem::path& path);

}  // namespace faqpilot
