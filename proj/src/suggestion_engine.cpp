#include "faqpilot/suggestion_engine.hpp"

#include <algorithm>
#include <future>
#include <unordered_map>

#include "faqpilot/error.hpp"
#include "faqpilot/text.hpp"

namespace faqpilot {

std::string_view to_string(MatchStrategy s) noexcept {
  return s == MatchStrategy::VectorOnly ? "vector_only" : "llm_rerank";
}

MatchStrategy parse_match_strategy(std::string_view s) {
  if (s == "vector_only") return MatchStrategy::VectorOnly;
  if (s == "llm_rerank") return MatchStrategy::LlmRerank;
  throw Error(ErrorCode::InvalidConfig, "unknown match strategy '" + std::string(s) + "'");
}

std::string_view to_string(SuggestionSource s) noexcept {
  return s == SuggestionSource::Matched ? "matched" : "generated";
}

std::string_view to_string(AnswerSource s) noexcept { return s == AnswerSource::Faq ? "faq" : "rag"; }

void EngineConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (window_size < 1) fail("window_size must be >= 1");
  if (trigger_interval < 1) fail("trigger_interval must be >= 1");
  if (match_shortlist < 1) fail("match_shortlist must be >= 1");
  if (deadline <= Duration::zero()) fail("deadline must be positive");
  if (!(match_min_score > 0.0 && match_min_score <= 1.0)) fail("match_min_score must lie in (0, 1]");
  if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0)) fail("dedup_threshold must lie in (0, 1]");
}

std::size_t SuggestionSet::count(SuggestionSource s) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(suggestions.begin(), suggestions.end(), [s](const Suggestion& x) { return x.source == s; }));
}

const Suggestion* SuggestionSet::find(const std::string& id) const noexcept {
  for (const auto& s : suggestions) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

namespace {

std::string format_answered(const std::vector<AnsweredQuestion>& answered) {
  if (answered.empty()) return "(none)";
  std::string out;
  for (const auto& a : answered) {
    if (!out.empty()) out += '\n';
    out += "- " + a.text;
  }
  return out;
}

bool near_any(const Vector& v, const std::vector<Suggestion>& kept, double threshold) {
  return std::any_of(kept.begin(), kept.end(),
                     [&](const Suggestion& s) { return dot(v, s.embedding) > threshold; });
}

std::int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

SuggestionEngine::SuggestionEngine(EngineDeps deps) : deps_(std::move(deps)) {
  if (!deps_.store || !deps_.gateway || !deps_.rag) {
    throw Error(ErrorCode::InvalidConfig, "engine needs a store, a gateway and a RAG client");
  }
  if (!deps_.prompts) deps_.prompts = std::make_shared<const PromptLibrary>(PromptLibrary::defaults());
  if (!deps_.clock) deps_.clock = deps_.gateway->clock_ptr();
}

Session SuggestionEngine::new_session(std::string id, EngineConfig config) const {
  config.validate();
  Session s;
  s.id = std::move(id);
  s.conversation.id = s.id;
  s.config = config;
  return s;
}

bool SuggestionEngine::should_trigger(const Session& session, TriggerMode mode) {
  if (session.conversation.empty()) return false;
  if (mode == TriggerMode::Manual) return true;
  const std::size_t current = session.conversation.last_index();
  const std::size_t interval = session.config.trigger_interval;
  if (!session.last_trigger_index) return current + 1 >= interval;
  return current >= *session.last_trigger_index && current - *session.last_trigger_index >= interval;
}

bool SuggestionEngine::near_answered(const Vector& v, const std::vector<AnsweredQuestion>& answered,
                                     double threshold) const {
  return std::any_of(answered.begin(), answered.end(),
                     [&](const AnsweredQuestion& a) { return dot(v, a.embedding) > threshold; });
}

RoundInput SuggestionEngine::begin_round(Session& session) const {
  if (session.conversation.empty()) {
    throw Error(ErrorCode::EmptyConversation, "session '" + session.id + "' has no turns");
  }
  const auto w = window(session.conversation, session.config.window_size);
  session.last_trigger_index = session.conversation.last_index();
  RoundInput in;
  in.session_id = session.id;
  in.round = ++session.rounds_started;
  in.trigger_turn_index = session.conversation.last_index();
  in.window_text = w.text();
  in.customer_utterances = w.customer_utterances();
  in.answered = session.answered;
  in.config = session.config;
  return in;
}

// Union of exact-scan results for the whole window and for each customer
// utterance in it, keeping each entry's best score.
std::vector<FaqMatch> SuggestionEngine::candidates(const RoundInput& input, std::size_t k, double min_score) const {
  const auto& embedder = deps_.store->embedder();
  std::vector<std::string> queries;
  if (!text::is_blank(input.window_text)) queries.push_back(input.window_text);
  for (const auto& u : input.customer_utterances) {
    if (!text::is_blank(u)) queries.push_back(u);
  }
  std::unordered_map<std::string, FaqMatch> best;
  for (const auto& q : queries) {
    for (auto& m : deps_.store->search(embedder.embed(q), k, min_score)) {
      auto [it, inserted] = best.try_emplace(m.qid, m);
      if (!inserted && m.score > it->second.score) it->second = std::move(m);
    }
  }
  std::vector<FaqMatch> out;
  out.reserve(best.size());
  for (auto& [_, m] : best) out.push_back(std::move(m));
  std::sort(out.begin(), out.end(), [](const FaqMatch& a, const FaqMatch& b) {
    return a.score != b.score ? a.score > b.score : a.qid < b.qid;
  });
  return out;
}

StageResult SuggestionEngine::match_stage(const RoundInput& input, Instant deadline_at) const {
  const auto& clock = *deps_.clock;
  const Instant start = clock.now();
  StageResult result;
  const auto& cfg = input.config;
  try {
    const bool rerank = cfg.match_strategy == MatchStrategy::LlmRerank;
    // The shortlist is deliberately broad; the LLM judges relevance.
    auto pool = candidates(input, cfg.match_shortlist, rerank ? 0.0 : cfg.match_min_score);

    std::vector<Suggestion> eligible;
    for (auto& m : pool) {
      auto entry = deps_.store->find(m.qid);
      if (!entry) continue;
      if (near_answered(entry->embedding, input.answered, cfg.dedup_threshold)) continue;
      Suggestion s;
      s.text = entry->question;
      s.source = SuggestionSource::Matched;
      s.qid = m.qid;
      s.score = m.score;
      s.embedding = std::move(entry->embedding);
      eligible.push_back(std::move(s));
    }

    std::vector<Suggestion> ordered;
    if (!rerank) {
      ordered = std::move(eligible);
    } else if (!eligible.empty()) {
      std::string listing;
      for (const auto& s : eligible) listing += "[" + s.qid + "] " + s.text + "\n";
      PromptVars vars{{"window", input.window_text},
                      {"answered", format_answered(input.answered)},
                      {"candidates", std::string(text::trim(listing))}};
      auto req = make_request(Role::Match, deps_.prompts->render(Role::Match, vars), deadline_at - clock.now(),
                              vars);
      for (const auto& item : deps_.gateway->complete_list(req, kStageQuota)) {
        // Accept "Q0001", "[Q0001]", or "[Q0001] question text"; prefer the longest qid.
        const Suggestion* hit = nullptr;
        for (const auto& s : eligible) {
          if (item.find(s.qid) != std::string::npos && (!hit || s.qid.size() > hit->qid.size())) hit = &s;
        }
        if (hit && std::none_of(ordered.begin(), ordered.end(),
                                [&](const Suggestion& o) { return o.qid == hit->qid; })) {
          ordered.push_back(*hit);
        }
      }
    }

    for (auto& s : ordered) {
      if (result.suggestions.size() == kStageQuota) break;
      if (near_any(s.embedding, result.suggestions, cfg.dedup_threshold)) continue;
      s.rank = result.suggestions.size() + 1;
      result.suggestions.push_back(std::move(s));
    }
  } catch (const std::exception& e) {
    result.suggestions.clear();
    result.degraded = true;
    result.error = e.what();
  }
  result.latency = clock.now() - start;
  return result;
}

StageResult SuggestionEngine::generate_stage(const RoundInput& input, Instant deadline_at) const {
  const auto& clock = *deps_.clock;
  const Instant start = clock.now();
  StageResult result;
  try {
    PromptVars vars{{"window", input.window_text}, {"answered", format_answered(input.answered)}};
    auto req = make_request(Role::Generate, deps_.prompts->render(Role::Generate, vars), deadline_at - clock.now(),
                            vars);
    const auto& embedder = deps_.store->embedder();
    for (auto& q : deps_.gateway->complete_list(req, kStageQuota)) {
      Suggestion s;
      s.embedding = embedder.embed(q);
      if (near_answered(s.embedding, input.answered, input.config.dedup_threshold)) continue;
      if (near_any(s.embedding, result.suggestions, input.config.dedup_threshold)) continue;
      s.text = std::move(q);
      s.source = SuggestionSource::Generated;
      s.rank = result.suggestions.size() + 1;
      result.suggestions.push_back(std::move(s));
    }
  } catch (const std::exception& e) {
    result.suggestions.clear();
    result.degraded = true;
    result.error = e.what();
  }
  result.latency = clock.now() - start;
  return result;
}

SuggestionSet SuggestionEngine::run_round(const RoundInput& input) const {
  const auto& clock = *deps_.clock;
  const Instant start = clock.now();
  const Duration budget = input.config.deadline;

  StageResult matched;
  StageResult generated;
  if (input.config.parallel_stages) {
    auto clock_ptr = deps_.clock;
    auto match_future = std::async(std::launch::async, [this, &input, start, budget, clock_ptr] {
      clock_ptr->enter(start);
      return match_stage(input, start + budget);
    });
    generated = generate_stage(input, start + budget);
    matched = match_future.get();
    // Join: the round ends when the slower stage does.
    clock.sleep_until(start + std::max(matched.latency, generated.latency));
  } else {
    matched = match_stage(input, start + budget);
    generated = generate_stage(input, clock.now() + budget);
  }

  SuggestionSet set;
  set.session_id = input.session_id;
  set.round = input.round;
  set.trigger_turn_index = input.trigger_turn_index;
  set.stage_latency = {matched.latency, generated.latency};
  set.match_degraded = matched.degraded;
  set.generate_degraded = generated.degraded;

  for (auto& s : matched.suggestions) set.suggestions.push_back(std::move(s));
  const std::size_t matched_count = set.suggestions.size();
  std::size_t rank = 0;
  for (auto& s : generated.suggestions) {
    // Matched wins a cross-source collision; no backfill afterwards.
    const bool dup = std::any_of(set.suggestions.begin(), set.suggestions.begin() + matched_count,
                                 [&](const Suggestion& m) { return dot(m.embedding, s.embedding) > input.config.dedup_threshold; });
    if (dup) continue;
    s.rank = ++rank;
    set.suggestions.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < set.suggestions.size(); ++i) {
    set.suggestions[i].id = "r" + std::to_string(input.round) + "-" + std::to_string(i + 1);
  }
  set.produced_at_ms = wall_ms();
  set.total_latency = clock.now() - start;

  counters_->sets.fetch_add(1);
  counters_->matched_suggested.fetch_add(set.count(SuggestionSource::Matched));
  counters_->generated_suggested.fetch_add(set.count(SuggestionSource::Generated));
  if (set.degraded()) counters_->degraded.fetch_add(1);
  return set;
}

const SuggestionSet& SuggestionEngine::install(Session& session, SuggestionSet set) const {
  if (session.active_set && session.active_set->round > set.round) return *session.active_set;
  std::erase_if(set.suggestions, [&](const Suggestion& s) {
    return near_answered(s.embedding, session.answered, session.config.dedup_threshold);
  });
  session.active_set = std::move(set);
  return *session.active_set;
}

SuggestionSet SuggestionEngine::suggest(Session& session, TriggerMode mode) const {
  if (mode == TriggerMode::Auto && !should_trigger(session, mode)) {
    throw Error(ErrorCode::InvalidArgument, "auto trigger is not due for session '" + session.id + "'");
  }
  auto input = begin_round(session);
  return install(session, run_round(input));
}

void SuggestionEngine::mark_answered(Session& session, const std::string& question) const {
  if (text::is_blank(question)) throw Error(ErrorCode::EmptyText, "answered question is empty");
  AnsweredQuestion a{question, deps_.store->embedder().embed(question)};
  if (session.active_set) {
    std::erase_if(session.active_set->suggestions, [&](const Suggestion& s) {
      return dot(s.embedding, a.embedding) > session.config.dedup_threshold;
    });
  }
  session.answered.push_back(std::move(a));
}

Answer SuggestionEngine::select(Session& session, const std::string& suggestion_id) const {
  const Suggestion* found = session.active_set ? session.active_set->find(suggestion_id) : nullptr;
  if (!found) throw Error(ErrorCode::UnknownSuggestion, "no active suggestion '" + suggestion_id + "'");
  const Suggestion suggestion = *found;
  const auto& clock = *deps_.clock;
  const Instant start = clock.now();

  auto ask_rag = [&]() -> RagAnswer {
    RagRequest req;
    req.question = suggestion.text;
    req.deadline = session.config.deadline;
    try {
      return deps_.rag->retrieve(req);
    } catch (const Error& e) {
      throw Error(ErrorCode::RagUnavailable, e.what());
    }
  };

  Answer answer;
  std::optional<FaqEntry> entry;
  if (suggestion.source == SuggestionSource::Matched) entry = deps_.store->find(suggestion.qid);

  if (entry && entry->answer) {
    counters_->faq.fetch_add(1);
    deps_.rag->record_bypass();
    answer.text = *entry->answer;
    answer.source = AnswerSource::Faq;
    answer.qid = entry->qid;
  } else if (entry) {
    counters_->answerless.fetch_add(1);
    auto rag = ask_rag();
    FaqUpsert backfill;
    backfill.qid = entry->qid;
    backfill.answer = rag.text;
    deps_.store->upsert(backfill);
    answer.text = std::move(rag.text);
    answer.source = AnswerSource::Rag;
    answer.qid = entry->qid;
    answer.source_refs = std::move(rag.source_refs);
  } else {
    // Generated, or a matched entry deleted since the set was produced.
    if (suggestion.source == SuggestionSource::Matched) counters_->answerless.fetch_add(1);
    else counters_->generated.fetch_add(1);
    auto rag = ask_rag();
    answer.text = std::move(rag.text);
    answer.source = AnswerSource::Rag;
    answer.source_refs = std::move(rag.source_refs);
  }
  answer.latency = clock.now() - start;

  session.selected[suggestion.id] = AnsweredSuggestion{suggestion, answer.text};
  mark_answered(session, suggestion.text);
  return answer;
}

TagResult SuggestionEngine::tag_as_faq(Session& session, const std::string& suggestion_id,
                                       std::optional<std::string> answer) const {
  const Suggestion* s = nullptr;
  const AnsweredSuggestion* done = nullptr;
  if (auto it = session.selected.find(suggestion_id); it != session.selected.end()) {
    done = &it->second;
    s = &it->second.suggestion;
  } else if (session.active_set) {
    s = session.active_set->find(suggestion_id);
  }
  if (!s) throw Error(ErrorCode::UnknownSuggestion, "no suggestion '" + suggestion_id + "'");
  if (s->source != SuggestionSource::Generated) {
    throw Error(ErrorCode::NotGenerated, "suggestion '" + suggestion_id + "' came from the FAQ store");
  }
  if (!done) throw Error(ErrorCode::NotYetAnswered, "select suggestion '" + suggestion_id + "' first");
  auto result = deps_.store->tag_runtime(s->text, answer.value_or(done->answer));
  counters_->tags.fetch_add(1);
  return result;
}

LedgerSnapshot SuggestionEngine::ledger() const noexcept {
  const auto& c = *counters_;
  return LedgerSnapshot{c.sets.load(),      c.matched_suggested.load(), c.generated_suggested.load(),
                        c.faq.load(),       c.answerless.load(),        c.generated.load(),
                        c.degraded.load(),  c.tags.load()};
}

}  // namespace faqpilot
