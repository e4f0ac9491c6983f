#pragma once

#include <nlohmann/json_fwd.hpp>

#include "faqpilot/faq_store.hpp"
#include "faqpilot/rag_client.hpp"
#include "faqpilot/suggestion_engine.hpp"

// Wire shapes for the HTTP API. Embeddings are never serialized.
namespace faqpilot {

void to_json(nlohmann::json& j, const Suggestion& s);
void to_json(nlohmann::json& j, const SuggestionSet& s);
void to_json(nlohmann::json& j, const Answer& a);
void to_json(nlohmann::json& j, const FaqEntry& e);
void to_json(nlohmann::json& j, const TagResult& t);
void to_json(nlohmann::json& j, const LedgerSnapshot& l);
void to_json(nlohmann::json& j, const RagCallCounter& c);

}  // namespace faqpilot
