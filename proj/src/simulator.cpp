#include "faqpilot/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "faqpilot/csv.hpp"
#include "faqpilot/error.hpp"
#include "faqpilot/scripted_responders.hpp"
#include "faqpilot/text.hpp"
#include "fs_util.hpp"
#include "parallel.hpp"

namespace faqpilot {

std::string_view to_string(SelectionRule r) noexcept {
  switch (r) {
    case SelectionRule::AlwaysFirstMatched: return "always_first_matched";
    case SelectionRule::AlwaysFirstGenerated: return "always_first_generated";
    case SelectionRule::PreferMatchedElseGenerated: return "prefer_matched_else_generated";
    case SelectionRule::Random: return "random";
    case SelectionRule::None: return "none";
  }
  return "none";
}

SelectionRule parse_selection_rule(std::string_view s) {
  for (auto r : {SelectionRule::AlwaysFirstMatched, SelectionRule::AlwaysFirstGenerated,
                 SelectionRule::PreferMatchedElseGenerated, SelectionRule::Random, SelectionRule::None}) {
    if (s == to_string(r)) return r;
  }
  if (s == "mixed") return SelectionRule::PreferMatchedElseGenerated;
  throw Error(ErrorCode::InvalidArgument, "unknown selection rule '" + std::string(s) + "'");
}

namespace {

std::size_t parse_size(std::string_view s, std::string_view what) {
  const auto t = text::trim(s);
  if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw Error(ErrorCode::InvalidArgument, "bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return static_cast<std::size_t>(std::stoull(std::string(t)));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

}  // namespace

ReplayPolicy parse_trigger_plan(std::string_view s, ReplayPolicy base) {
  if (s == "auto") {
    base.trigger = TriggerPlan::Auto;
  } else if (s.rfind("every:", 0) == 0) {
    base.trigger = TriggerPlan::EveryK;
    base.every_k = parse_size(s.substr(6), "trigger interval");
    if (base.every_k == 0) throw Error(ErrorCode::InvalidArgument, "trigger interval must be >= 1");
  } else if (s.rfind("manual:", 0) == 0) {
    base.trigger = TriggerPlan::ManualAt;
    base.manual_at.clear();
    for (const auto& part : split(s.substr(7), ',')) base.manual_at.push_back(parse_size(part, "turn index"));
  } else {
    throw Error(ErrorCode::InvalidArgument, "trigger plan must be auto, every:K or manual:I,J,...");
  }
  return base;
}

double nearest_rank(std::vector<double> samples, double p) {
  if (samples.empty()) return 0.0;
  if (!(p > 0.0 && p <= 100.0)) throw Error(ErrorCode::InvalidArgument, "percentile must lie in (0, 100]");
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(samples.size())));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

LatencySummary summarize_latency(const std::vector<double>& samples_ms) {
  LatencySummary s;
  s.samples = samples_ms.size();
  if (samples_ms.empty()) return s;
  s.p50_ms = nearest_rank(samples_ms, 50.0);
  s.p95_ms = nearest_rank(samples_ms, 95.0);
  s.max_ms = *std::max_element(samples_ms.begin(), samples_ms.end());
  return s;
}

StrategyProfile parse_profile(std::string_view s) {
  const auto parts = split(s, ':');
  if (parts.size() < 3 || parts.size() > 6 || text::is_blank(parts[0])) {
    throw Error(ErrorCode::InvalidArgument,
                "profile must look like label:strategy:llm_ms[:rag_ms[:serial|parallel[:deadline_ms]]]");
  }
  StrategyProfile p;
  p.label = std::string(text::trim(parts[0]));
  p.match_strategy = parse_match_strategy(parts[1]);
  p.llm_latency = milliseconds(parse_size(parts[2], "llm latency"));
  if (parts.size() > 3) p.rag_latency = milliseconds(parse_size(parts[3], "rag latency"));
  if (parts.size() > 4) {
    if (parts[4] == "serial") p.parallel_stages = false;
    else if (parts[4] != "parallel") throw Error(ErrorCode::InvalidArgument, "expected serial or parallel");
  }
  if (parts.size() > 5) p.deadline = milliseconds(parse_size(parts[5], "deadline"));
  return p;
}

std::vector<StrategyProfile> default_profiles() {
  StrategyProfile vec{"vector_only", MatchStrategy::VectorOnly, Duration::zero()};
  StrategyProfile parallel{"parallel_small", MatchStrategy::LlmRerank, milliseconds(1500)};
  StrategyProfile serial{"serial_large", MatchStrategy::LlmRerank, milliseconds(2500)};
  serial.parallel_stages = false;
  serial.deadline = milliseconds(3000);
  return {vec, parallel, serial};
}

LatentEmbedder::LatentEmbedder(std::shared_ptr<const Embedder> inner, Duration latency,
                               std::shared_ptr<const Clock> clock)
    : inner_(std::move(inner)), latency_(latency), clock_(std::move(clock)) {}

Vector LatentEmbedder::embed(std::string_view text) const {
  clock_->sleep_for(latency_);
  return inner_->embed(text);
}

std::vector<Vector> LatentEmbedder::embed_batch(const std::vector<std::string>& texts) const {
  clock_->sleep_for(latency_);
  return inner_->embed_batch(texts);
}

namespace {

struct RunResult {
  ReplayMetrics counts;
  std::vector<double> match_ms, generate_ms, total_ms;
};

const Suggestion* first_of(const SuggestionSet& set, SuggestionSource src) {
  for (const auto& s : set.suggestions) {
    if (s.source == src) return &s;
  }
  return nullptr;
}

const Suggestion* choose(const SuggestionSet& set, const ReplayPolicy& policy, std::mt19937_64& rng) {
  switch (policy.selection) {
    case SelectionRule::AlwaysFirstMatched: return first_of(set, SuggestionSource::Matched);
    case SelectionRule::AlwaysFirstGenerated: return first_of(set, SuggestionSource::Generated);
    case SelectionRule::PreferMatchedElseGenerated: {
      const auto* m = first_of(set, SuggestionSource::Matched);
      return m ? m : first_of(set, SuggestionSource::Generated);
    }
    case SelectionRule::Random: {
      if (set.suggestions.empty()) return nullptr;
      std::uniform_int_distribution<std::size_t> pick(0, set.suggestions.size() - 1);
      return &set.suggestions[pick(rng)];
    }
    case SelectionRule::None: return nullptr;
  }
  return nullptr;
}

bool set_is_valid(const SuggestionSet& set, const std::vector<AnsweredQuestion>& answered, double threshold) {
  const auto m = set.count(SuggestionSource::Matched);
  const auto g = set.count(SuggestionSource::Generated);
  if (m > kStageQuota || g > kStageQuota || set.suggestions.size() > 2 * kStageQuota) return false;
  for (std::size_t i = 0; i < set.suggestions.size(); ++i) {
    const auto& a = set.suggestions[i];
    for (const auto& q : answered) {
      if (dot(a.embedding, q.embedding) > threshold) return false;
    }
    for (std::size_t j = i + 1; j < set.suggestions.size(); ++j) {
      const auto& b = set.suggestions[j];
      if (a.source != b.source && dot(a.embedding, b.embedding) > threshold) return false;
    }
  }
  return true;
}

bool due(const Session& s, const ReplayPolicy& policy) {
  const auto idx = s.conversation.last_index();
  switch (policy.trigger) {
    case TriggerPlan::Auto: return SuggestionEngine::should_trigger(s, TriggerMode::Auto);
    case TriggerPlan::EveryK: return (idx + 1) % policy.every_k == 0;
    case TriggerPlan::ManualAt:
      return std::find(policy.manual_at.begin(), policy.manual_at.end(), idx) != policy.manual_at.end();
  }
  return false;
}

RunResult replay_one(const Conversation& conv, std::size_t rep, const FaqStore& store, const EngineConfig& base,
                     const ReplayPolicy& policy, const StrategyProfile& profile, const ReplayOptions& options,
                     const std::shared_ptr<const PromptLibrary>& prompts) {
  std::shared_ptr<const Clock> clock = options.virtual_time ? std::make_shared<VirtualClock>() : steady_clock();

  ScriptedBehavior behavior = scripted::offline_behavior();
  behavior.injected_latency = profile.llm_latency;
  auto gateway = std::make_shared<LlmGateway>(std::make_shared<ScriptedProvider>(std::move(behavior), clock), clock);
  ScriptedRagBehavior rag_behavior;
  rag_behavior.injected_latency = profile.rag_latency;
  auto rag = std::make_shared<RagClient>(std::make_shared<ScriptedRagBackend>(std::move(rag_behavior), clock), clock);

  std::shared_ptr<const Embedder> embedder;
  if (profile.embed_latency > Duration::zero()) {
    // Non-owning: the source store outlives the replay.
    std::shared_ptr<const Embedder> inner(std::shared_ptr<const Embedder>{}, &store.embedder());
    embedder = std::make_shared<LatentEmbedder>(std::move(inner), profile.embed_latency, clock);
  }
  std::shared_ptr<FaqStore> local = store.clone(embedder);
  SuggestionEngine engine(EngineDeps{local, gateway, rag, prompts, clock});

  EngineConfig cfg = base;
  cfg.match_strategy = profile.match_strategy;
  cfg.parallel_stages = profile.parallel_stages;
  if (profile.deadline) cfg.deadline = *profile.deadline;

  std::seed_seq seq{policy.seed, text::fnv1a64(conv.id), static_cast<std::uint64_t>(rep)};
  std::mt19937_64 rng(seq);

  RunResult out;
  Session session = engine.new_session(conv.id, cfg);
  for (const auto& turn : conv.turns) {
    session.conversation = append_turn(session.conversation, turn.speaker, turn.text, turn.timestamp_ms);
    if (!due(session, policy)) continue;
    const auto mode = policy.trigger == TriggerPlan::Auto ? TriggerMode::Auto : TriggerMode::Manual;
    const auto set = engine.suggest(session, mode);
    if (!set_is_valid(set, session.answered, cfg.dedup_threshold)) ++out.counts.invariant_violations;
    out.match_ms.push_back(to_ms(set.stage_latency.match));
    out.generate_ms.push_back(to_ms(set.stage_latency.generate));
    out.total_ms.push_back(to_ms(set.total_latency));

    if (const auto* pick = choose(set, policy, rng)) {
      try {
        (void)engine.select(session, pick->id);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::RagUnavailable) throw;
        ++out.counts.rag_failures;
      }
    }
  }

  const auto ledger = engine.ledger();
  const auto rc = rag->counters();
  auto& m = out.counts;
  m.runs = 1;
  m.suggestion_sets = ledger.sets_produced;
  m.matched_suggested = ledger.matched_suggested;
  m.generated_suggested = ledger.generated_suggested;
  m.faq_selected = ledger.faq_selections;
  m.answerless_selected = ledger.answerless_matched_selections;
  m.generated_selected = ledger.generated_selections;
  m.rag_calls_made = rc.calls_made;
  m.rag_calls_bypassed = rc.calls_bypassed;
  m.degraded = ledger.degraded_rounds;
  return out;
}

}  // namespace

ReplayMetrics replay(const std::vector<Conversation>& transcripts, const FaqStore& store, const EngineConfig& config,
                     const ReplayPolicy& policy, const StrategyProfile& profile, const ReplayOptions& options) {
  if (options.repetitions < 1) throw Error(ErrorCode::InvalidArgument, "repetitions must be >= 1");
  if (policy.trigger == TriggerPlan::EveryK && policy.every_k == 0) {
    throw Error(ErrorCode::InvalidArgument, "trigger interval must be >= 1");
  }
  config.validate();
  auto prompts = std::make_shared<const PromptLibrary>(PromptLibrary::defaults());

  const std::size_t n = transcripts.size() * options.repetitions;
  std::vector<RunResult> runs(n);
  detail::parallel_for(n, std::max<std::size_t>(1, options.parallelism), [&](std::size_t i) {
    const auto& conv = transcripts[i / options.repetitions];
    runs[i] = replay_one(conv, i % options.repetitions, store, config, policy, profile, options, prompts);
  });

  ReplayMetrics total;
  std::vector<double> match_ms, generate_ms, total_ms;
  for (const auto& r : runs) {
    const auto& c = r.counts;
    total.runs += c.runs;
    total.suggestion_sets += c.suggestion_sets;
    total.matched_suggested += c.matched_suggested;
    total.generated_suggested += c.generated_suggested;
    total.faq_selected += c.faq_selected;
    total.answerless_selected += c.answerless_selected;
    total.generated_selected += c.generated_selected;
    total.rag_calls_made += c.rag_calls_made;
    total.rag_calls_bypassed += c.rag_calls_bypassed;
    total.rag_failures += c.rag_failures;
    total.degraded += c.degraded;
    total.invariant_violations += c.invariant_violations;
    match_ms.insert(match_ms.end(), r.match_ms.begin(), r.match_ms.end());
    generate_ms.insert(generate_ms.end(), r.generate_ms.begin(), r.generate_ms.end());
    total_ms.insert(total_ms.end(), r.total_ms.begin(), r.total_ms.end());
  }
  total.match_latency = summarize_latency(match_ms);
  total.generate_latency = summarize_latency(generate_ms);
  total.end_to_end = summarize_latency(total_ms);
  return total;
}

std::vector<ProfileResult> compare_strategies(const std::vector<Conversation>& transcripts, const FaqStore& store,
                                              const EngineConfig& config, const ReplayPolicy& policy,
                                              const std::vector<StrategyProfile>& profiles,
                                              const ReplayOptions& options) {
  if (profiles.size() < 2) throw Error(ErrorCode::InvalidArgument, "compare needs at least two profiles");
  std::set<std::string> labels;
  for (const auto& p : profiles) {
    if (!labels.insert(p.label).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate profile label '" + p.label + "'");
    }
  }
  std::vector<ProfileResult> out;
  for (const auto& p : profiles) out.push_back({p, replay(transcripts, store, config, policy, p, options)});
  return out;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "table" || s == "text" || s == "text-table") return ReportFormat::Table;
  throw Error(ErrorCode::InvalidArgument, "report format must be csv or table");
}

namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::vector<std::string> report_cells(const ProfileResult& r) {
  const auto& m = r.metrics;
  return {r.profile.label,
          std::to_string(m.runs),
          std::to_string(m.suggestion_sets),
          std::to_string(m.matched_suggested),
          std::to_string(m.generated_suggested),
          std::to_string(m.matched_selected()),
          std::to_string(m.generated_selected),
          std::to_string(m.rag_calls_made),
          std::to_string(m.rag_calls_bypassed),
          fixed3(m.end_to_end.p50_ms),
          fixed3(m.end_to_end.p95_ms),
          fixed3(m.end_to_end.max_ms),
          std::to_string(m.degraded)};
}

}  // namespace

void write_report(std::ostream& out, const std::vector<ProfileResult>& rows, ReportFormat format) {
  std::vector<std::string> header;
  for (const auto& h : split(kReportCsvHeader, ',')) header.push_back(h);
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) cells.push_back(report_cells(r));

  if (format == ReportFormat::Csv) {
    out << kReportCsvHeader << '\n';
    for (const auto& row : cells) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << csv::escape(row[i]);
      }
      out << '\n';
    }
    return;
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << "  ";
      // Label left-aligned, numbers right-aligned.
      if (i == 0) out << std::left << std::setw(static_cast<int>(width[i])) << row[i];
      else out << std::right << std::setw(static_cast<int>(width[i])) << row[i];
    }
    out << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& row : cells) line(row);
}

void emit_report(const std::filesystem::path& path, const std::vector<ProfileResult>& rows, ReportFormat format) {
  std::ostringstream out;
  write_report(out, rows, format);
  detail::write_file_atomic(path, out.str());
}

}  // namespace faqpilot
