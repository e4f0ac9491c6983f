#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "faqpilot/llm_gateway.hpp"

namespace faqpilot::scripted {

/// Heuristic stand-ins for every prompted role, reading the rendered
/// template variables. Lets the CLI, simulator and tests run fully offline
/// with plausible (not intelligent) output.
ScriptedBehavior offline_behavior();

/// Normalized question with conversational fillers ("also", "quick
/// question", trailing "please") removed. Equal keys mean "same question".
std::string canonical_key(std::string_view question);

/// Canonical key rendered as a tidy question: capitalized, ending in '?'.
std::string tidy_question(std::string_view question);

/// Greeting, agent-information and personal-detail questions.
bool is_discardable(std::string_view question);

/// Sentences of an utterance that read as questions.
std::vector<std::string> question_sentences(std::string_view utterance);

}  // namespace faqpilot::scripted
