#include "faqpilot/json_codec.hpp"

#include <nlohmann/json.hpp>

namespace faqpilot {

using nlohmann::json;

void to_json(json& j, const Suggestion& s) {
  j = {{"id", s.id}, {"text", s.text}, {"source", to_string(s.source)}, {"rank", s.rank}};
  if (s.source == SuggestionSource::Matched) {
    j["qid"] = s.qid;
    j["score"] = s.score;
  }
}

void to_json(json& j, const SuggestionSet& s) {
  j = {{"session_id", s.session_id},
       {"round", s.round},
       {"trigger_turn_index", s.trigger_turn_index},
       {"suggestions", s.suggestions},
       {"produced_at_ms", s.produced_at_ms},
       {"latency_ms",
        {{"match", to_ms(s.stage_latency.match)},
         {"generate", to_ms(s.stage_latency.generate)},
         {"total", to_ms(s.total_latency)}}},
       {"match_degraded", s.match_degraded},
       {"generate_degraded", s.generate_degraded}};
}

void to_json(json& j, const Answer& a) {
  j = {{"text", a.text}, {"source", to_string(a.source)}, {"latency_ms", to_ms(a.latency)},
       {"source_refs", a.source_refs}};
  j["qid"] = a.qid.empty() ? json(nullptr) : json(a.qid);
}

void to_json(json& j, const FaqEntry& e) {
  j = {{"qid", e.qid},
       {"question", e.question},
       {"answer", e.answer ? json(*e.answer) : json(nullptr)},
       {"frequency", e.frequency},
       {"source", to_string(e.source)},
       {"created_at_ms", e.created_at_ms},
       {"updated_at_ms", e.updated_at_ms}};
}

void to_json(json& j, const TagResult& t) { j = {{"qid", t.qid}, {"merged", t.merged}}; }

void to_json(json& j, const LedgerSnapshot& l) {
  j = {{"sets_produced", l.sets_produced},
       {"matched_suggested", l.matched_suggested},
       {"generated_suggested", l.generated_suggested},
       {"faq_selections", l.faq_selections},
       {"answerless_matched_selections", l.answerless_matched_selections},
       {"generated_selections", l.generated_selections},
       {"degraded_rounds", l.degraded_rounds},
       {"tags", l.tags}};
}

void to_json(json& j, const RagCallCounter& c) {
  j = {{"calls_made", c.calls_made}, {"calls_bypassed", c.calls_bypassed}};
}

}  // namespace faqpilot
