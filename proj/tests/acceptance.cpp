// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "faqpilot/config.hpp"
#include "faqpilot/kmeans.hpp"
#include "faqpilot/mining.hpp"
#include "faqpilot/scripted_responders.hpp"
#include "faqpilot/service.hpp"
#include "faqpilot/simulator.hpp"
#include "faqpilot/suggestion_engine.hpp"
#include "faqpilot/synth_corpus.hpp"
#include "support/generators.hpp"

using namespace faqpilot;
using namespace std::chrono_literals;
using faqpilot::testing::Gen;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Tolerances and sizes.
constexpr double kGraceMs = 100.0;
constexpr double kParallelBudgetMs = 2000.0;
constexpr double kSerialFloorMs = 5000.0;
constexpr double kSearchP95BudgetMs = 600.0;
constexpr std::size_t kSearchEntries = 10000;
constexpr std::size_t kSearchQueries = 1000;
constexpr std::size_t kMinRounds = 1000;
constexpr double kNearDuplicate = 0.90;
constexpr std::size_t kRecoveredOfTop10 = 9;
constexpr double kIntentCosine = 0.80;
constexpr double kObjectiveEps = 1e-12;
constexpr std::size_t kOracleRestarts = 32;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Rig {
  std::shared_ptr<const Clock> clock;
  std::shared_ptr<FaqStore> store;
  std::shared_ptr<LlmGateway> gateway;
  std::shared_ptr<RagClient> rag;
  std::unique_ptr<SuggestionEngine> engine;

  explicit Rig(ScriptedBehavior llm = scripted::offline_behavior(), std::shared_ptr<const Clock> c = steady_clock())
      : clock(std::move(c)) {
    store = std::make_shared<FaqStore>(StoreConfig{}, std::make_shared<DeterministicEmbedder>(256, 0));
    gateway = std::make_shared<LlmGateway>(std::make_shared<ScriptedProvider>(std::move(llm), clock), clock);
    rag = std::make_shared<RagClient>(std::make_shared<ScriptedRagBackend>(ScriptedRagBehavior{}, clock), clock);
    engine = std::make_unique<SuggestionEngine>(
        EngineDeps{store, gateway, rag, std::make_shared<PromptLibrary>(PromptLibrary::defaults()), clock});
  }

  std::string faq(const std::string& question, std::optional<std::string> answer) {
    FaqUpsert f;
    f.question = question;
    f.answer = std::move(answer);
    return store->upsert(f);
  }
};

void say(Session& s, Speaker who, const std::string& text) { s.conversation = append_turn(s.conversation, who, text); }

double wall_ms(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(1);
  s << v;
  return s.str();
}

Outcome parallel_fan_out() {
  // Real clock: both stages sleep on the scripted provider.
  auto timed = [](Duration stage, bool parallel, Duration deadline, SuggestionSet* out) {
    ScriptedBehavior slow = scripted::offline_behavior();
    slow.injected_latency = stage;
    Rig rig(slow);
    rig.faq("How do I reset my router?", "Hold the reset button.");
    EngineConfig cfg;
    cfg.parallel_stages = parallel;
    cfg.deadline = deadline;
    auto s = rig.engine->new_session("latency", cfg);
    say(s, Speaker::Customer, "How do I reset my router? Can I pause my plan while abroad?");
    const double ms = wall_ms([&] { *out = rig.engine->suggest(s, TriggerMode::Manual); });
    if (rig.rag->counters().calls_made != 0) return -1.0;
    return ms;
  };
  SuggestionSet par, ser;
  const double p = timed(1500ms, true, 2s, &par);
  const double s = timed(2500ms, false, 3s, &ser);
  const bool ok = p >= 0 && p < kParallelBudgetMs + kGraceMs && !par.degraded() && par.count(SuggestionSource::Matched) &&
                  par.count(SuggestionSource::Generated) && s >= kSerialFloorMs && !ser.degraded();
  return {ok, "parallel " + fmt(p) + " ms (< " + fmt(kParallelBudgetMs + kGraceMs) + "), serial " + fmt(s) +
                  " ms (>= " + fmt(kSerialFloorMs) + ")"};
}

Outcome vector_search_latency() {
  Gen g(42);
  FaqStore store(StoreConfig{}, std::make_shared<DeterministicEmbedder>(256, 0));
  for (std::size_t i = 0; i < kSearchEntries; ++i) {
    FaqUpsert f;
    f.question = g.question() + " #" + std::to_string(i);
    store.upsert(f);
  }
  const DeterministicEmbedder e(256, 0);
  std::vector<double> samples;
  samples.reserve(kSearchQueries);
  std::size_t empty = 0;
  for (std::size_t i = 0; i < kSearchQueries; ++i) {
    const auto q = e.embed(g.question());
    std::vector<FaqMatch> hits;
    samples.push_back(wall_ms([&] { hits = store.search(q, 20); }));
    if (hits.empty()) ++empty;
  }
  const double p95 = nearest_rank(samples, 95);
  return {store.size() == kSearchEntries && p95 < kSearchP95BudgetMs && empty == 0,
          std::to_string(store.size()) + " entries, p95 " + fmt(p95) + " ms over " + std::to_string(kSearchQueries) +
              " queries (< " + fmt(kSearchP95BudgetMs) + ")"};
}

Outcome set_properties() {
  std::size_t rounds = 0, violations = 0, suggestions = 0;
  for (std::uint64_t seed = 0; rounds < kMinRounds; ++seed) {
    Gen g(seed);
    Rig rig;
    for (std::size_t i = g.range(0, 40); i > 0; --i) {
      rig.faq(g.question(), g.coin(0.6) ? std::optional<std::string>("answer") : std::nullopt);
    }
    EngineConfig cfg;
    cfg.match_strategy = g.coin(0.5) ? MatchStrategy::LlmRerank : MatchStrategy::VectorOnly;
    cfg.match_min_score = g.uniform(0.3, 0.8);
    cfg.trigger_interval = g.range(2, 4);
    auto s = rig.engine->new_session("p" + std::to_string(seed), cfg);
    const DeterministicEmbedder e(256, 0);
    for (int turn = 0; turn < 24; ++turn) {
      say(s, turn % 2 ? Speaker::Agent : Speaker::Customer,
          g.coin(0.7) ? g.question() + " " + g.question() : "ok " + g.word());
      if (!SuggestionEngine::should_trigger(s, TriggerMode::Auto)) continue;
      const auto set = rig.engine->suggest(s, TriggerMode::Auto);
      ++rounds;
      suggestions += set.suggestions.size();
      bool bad = set.count(SuggestionSource::Matched) > 3 || set.count(SuggestionSource::Generated) > 3 ||
                 set.suggestions.size() > 6;
      for (std::size_t i = 0; i < set.suggestions.size(); ++i) {
        const auto v = e.embed(set.suggestions[i].text);
        for (const auto& a : s.answered) bad |= cosine(v, e.embed(a.text)) > kNearDuplicate;
        for (std::size_t j = i + 1; j < set.suggestions.size(); ++j) {
          if (set.suggestions[j].source == set.suggestions[i].source) continue;
          bad |= cosine(v, e.embed(set.suggestions[j].text)) > kNearDuplicate;
        }
      }
      violations += bad;
      if (!set.suggestions.empty() && g.coin(0.6)) {
        (void)rig.engine->select(s, set.suggestions[g.index(set.suggestions.size())].id);
      }
    }
  }
  return {violations == 0, std::to_string(rounds) + " rounds, " + std::to_string(suggestions) + " suggestions, " +
                               std::to_string(violations) + " violations"};
}

std::vector<Conversation> ten_calls() {
  CorpusSpec spec;
  spec.num_calls = 10;
  spec.intents = {{"How do I reset my router?", 8},
                  {"Why is my bill higher this month?", 6},
                  {"Can I pause my service while traveling?", 5},
                  {"What is the late payment fee?", 4}};
  return synth_corpus(spec, 11);
}

Outcome cost_bypass() {
  const auto calls = ten_calls();
  FaqStore answered(StoreConfig{}, std::make_shared<DeterministicEmbedder>(256, 0));
  FaqStore mixed(StoreConfig{}, std::make_shared<DeterministicEmbedder>(256, 0));
  for (const auto& q : {"How do I reset my router?", "Why is my bill higher this month?",
                        "Can I pause my service while traveling?", "What is the late payment fee?"}) {
    FaqUpsert f;
    f.question = q;
    f.answer = std::string("Stored answer.");
    answered.upsert(f);
    if (q[0] == 'C') continue;  // left for the generator
    if (q[0] == 'W') f.answer.reset();
    mixed.upsert(f);
  }
  const StrategyProfile profile{"bypass", MatchStrategy::VectorOnly, {}, {}, {}, true, std::nullopt};
  ReplayPolicy first;
  first.selection = SelectionRule::AlwaysFirstMatched;
  const auto a = replay(calls, answered, {}, first, profile, {});
  const auto selections = a.faq_selected + a.answerless_selected + a.generated_selected;
  const bool bypass_ok = a.rag_calls_made == 0 && a.rag_calls_bypassed == selections && selections > 0;

  ReplayPolicy pref;
  pref.selection = SelectionRule::PreferMatchedElseGenerated;
  const auto m = replay(calls, mixed, {}, pref, profile, {});
  const bool mixed_ok = m.rag_calls_made == m.generated_selected + m.answerless_selected &&
                        m.rag_calls_bypassed == m.faq_selected && m.answerless_selected > 0 && m.faq_selected > 0 && m.generated_selected > 0;
  ReplayPolicy random;
  random.selection = SelectionRule::Random;
  random.seed = 5;
  const auto r = replay(calls, mixed, {}, random, profile, {3, true, 1});
  const bool random_ok = r.rag_calls_made == r.generated_selected + r.answerless_selected &&
                         r.rag_calls_bypassed == r.faq_selected && r.generated_selected > 0;
  return {bypass_ok && mixed_ok && random_ok,
          "first_matched: rag " + std::to_string(a.rag_calls_made) + ", bypassed " +
              std::to_string(a.rag_calls_bypassed) + " of " + std::to_string(selections) + " selections; mixed: rag " +
              std::to_string(m.rag_calls_made) + " = generated " + std::to_string(m.generated_selected) +
              " + answerless " + std::to_string(m.answerless_selected) + "; random: rag " +
              std::to_string(r.rag_calls_made) + " = generated " + std::to_string(r.generated_selected) +
              " + answerless " + std::to_string(r.answerless_selected)};
}

Outcome mining_recovery() {
  CorpusSpec spec;
  spec.num_calls = 500;
  spec.intents = default_intents();
  const auto corpus = synth_corpus(spec, 2024);

  LlmGateway gateway(std::make_shared<ScriptedProvider>(scripted::offline_behavior()));
  const auto prompts = PromptLibrary::defaults();
  const DeterministicEmbedder e(256, 0);
  RagClient rag(std::make_shared<ScriptedRagBackend>(ScriptedRagBehavior{}));
  FaqStore store(StoreConfig{}, std::make_shared<DeterministicEmbedder>(256, 0));
  MiningConfig cfg;
  cfg.k = 40;
  cfg.top_n = 10;
  cfg.kmeans_n_init = 4;
  const auto report = run_pipeline(corpus, cfg, gateway, prompts, e, rag, store);

  auto truth = spec.intents;
  std::stable_sort(truth.begin(), truth.end(),
                   [](const auto& a, const auto& b) { return a.target_frequency > b.target_frequency; });
  truth.resize(10);
  std::set<std::size_t> hit;
  for (const auto& rep : report.top) {
    const auto v = e.embed(rep.text);
    std::size_t best = 0;
    double best_cos = -1;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const double c = cosine(v, e.embed(truth[i].question));
      if (c > best_cos) best_cos = c, best = i;
    }
    if (best_cos >= kIntentCosine) hit.insert(best);
  }

  const auto* extract = report.stage("extract");
  const auto* critic = report.stage("critic");
  const auto filtered = critic->output_count;
  bool conserved = true;
  for (const char* st : {"summarize", "merge", "review"}) conserved &= report.stage(st)->frequency_total == filtered;
  const std::size_t raw = extract->output_count;
  const std::size_t expect_batches = (raw + 29) / 30;
  const bool ok = hit.size() >= kRecoveredOfTop10 && conserved && report.critic_batches == expect_batches &&
                  gateway.calls(Role::Critic) >= expect_batches;
  return {ok, std::to_string(hit.size()) + "/10 top intents recovered, frequency " +
                  (conserved ? "conserved (" + std::to_string(filtered) + ")" : "NOT conserved") + ", critic batches " +
                  std::to_string(report.critic_batches) + " for " + std::to_string(raw) + " questions (expect " +
                  std::to_string(expect_batches) + ")"};
}

double brute_force_two_means(const std::vector<Vector>& pts) {
  const std::size_t n = pts.size(), dim = pts[0].size();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
    double sse = 0;
    for (unsigned side = 0; side < 2; ++side) {
      Vector mean(dim, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (((mask >> i) & 1U) != side) continue;
        for (std::size_t d = 0; d < dim; ++d) mean[d] += pts[i][d];
        ++count;
      }
      for (auto& m : mean) m /= static_cast<double>(count);
      for (std::size_t i = 0; i < n; ++i) {
        if (((mask >> i) & 1U) == side) sse += squared_distance(pts[i], mean);
      }
    }
    best = std::min(best, sse);
  }
  return best;
}

Outcome kmeans_correctness() {
  std::size_t monotone = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Gen g(seed);
    const std::size_t n = g.range(3, 120), dim = g.range(1, 16);
    const std::size_t k = g.range(1, std::min<std::size_t>(n, 12));
    std::vector<Vector> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(g.gaussian(dim));
    const auto r = kmeans(pts, {k, 100, seed, 1});
    bool ok = !r.objective_trace.empty();
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
      ok &= r.objective_trace[i] <= r.objective_trace[i - 1] + kObjectiveEps;
    }
    monotone += ok;
  }

  std::size_t exact = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Gen g(1000 + seed);
    const std::size_t n = g.range(2, 8), dim = g.range(1, 4);
    std::vector<Vector> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(g.gaussian(dim));
    const double oracle = brute_force_two_means(pts);
    const auto r = kmeans(pts, {2, 100, seed, kOracleRestarts});
    exact += std::abs(r.objective - oracle) <= 1e-9 * std::max(1.0, oracle);
  }

  Gen g(85);
  std::vector<FilteredQuestion> questions;
  for (std::size_t i = 0; i < 2000; ++i) questions.push_back({g.question(), "call" + std::to_string(i % 200)});
  MiningConfig cfg;  // k = 85
  std::vector<std::string> warnings;
  std::size_t clusters = 0, empty = 0;
  std::string error;
  try {
    const auto out = cluster_questions(questions, DeterministicEmbedder(256, 0), cfg, &warnings);
    clusters = out.size();
    for (const auto& c : out) empty += c.members.empty();
  } catch (const std::exception& ex) {
    error = ex.what();
  }
  const bool ok = monotone == 100 && exact == 50 && cfg.k == 85 && clusters == 85 && empty == 0 && error.empty();
  return {ok, "monotone " + std::to_string(monotone) + "/100, brute-force equal " + std::to_string(exact) +
                  "/50, k=85 on 2000 questions -> " + std::to_string(clusters) + " clusters, " +
                  std::to_string(empty) + " empty" + (error.empty() ? "" : " (" + error + ")")};
}

Outcome persistence() {
  const auto dir = fs::temp_directory_path() / ("faqpilot_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto embedder = std::make_shared<DeterministicEmbedder>(256, 0);
  StoreConfig sc;
  std::int64_t tick = 1700000000000;
  sc.now_ms = [&tick] { return tick += 7; };
  FaqStore store(sc, embedder);
  Gen g(500);
  std::vector<std::string> ids;
  for (int i = 0; i < 500; ++i) {
    const auto op = g.index(10);
    if (op < 5 || ids.empty()) {
      FaqUpsert f;
      f.question = g.question() + " " + g.awkward_text(12) + " " + std::to_string(i);
      if (g.coin(0.7)) f.answer = g.awkward_text(30);
      f.frequency = g.range(0, 5000);
      f.source = g.coin(0.5) ? FaqSource::Mined : FaqSource::Supervisor;
      ids.push_back(store.upsert(f));
    } else if (op < 8) {
      FaqUpsert f;
      f.qid = ids[g.index(ids.size())];
      if (!store.find(*f.qid)) continue;
      f.frequency = g.range(0, 1000);
      if (g.coin(0.3)) f.question = g.awkward_text(24) + "?" + std::to_string(i);
      if (g.coin(0.2)) f.clear_answer = true;
      store.upsert(f);
    } else if (op < 9) {
      store.remove(ids[g.index(ids.size())]);
    } else {
      store.tag_runtime(g.question(), g.awkward_text(20));
    }
  }
  store.persist(dir / "faq.bin");
  FaqStore loaded(StoreConfig{}, embedder);
  loaded.load(dir / "faq.bin");
  const bool snapshot_equal = loaded.entries() == store.entries();

  store.export_csv(dir / "faq.csv");
  FaqStore imported(StoreConfig{}, embedder);
  const auto result = imported.import_csv(dir / "faq.csv");
  std::size_t csv_mismatch = 0;
  const auto a = store.entries(), b = imported.entries();
  if (a.size() != b.size()) csv_mismatch = std::max(a.size(), b.size());
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    csv_mismatch += !(a[i].qid == b[i].qid && a[i].question == b[i].question && a[i].answer == b[i].answer &&
                      a[i].frequency == b[i].frequency && a[i].source == b[i].source &&
                      a[i].created_at_ms == b[i].created_at_ms && a[i].updated_at_ms == b[i].updated_at_ms);
  }
  fs::remove_all(dir);
  return {snapshot_equal && result.errors.empty() && csv_mismatch == 0,
          std::to_string(a.size()) + " entries after 500 mutations; snapshot " +
              (snapshot_equal ? "field-exact" : "DIFFERS") + "; csv " + std::to_string(result.count) + " rows, " +
              std::to_string(result.errors.size()) + " errors, " + std::to_string(csv_mismatch) + " mismatches"};
}

Outcome simulation_protocol() {
  const auto calls = ten_calls();
  FaqStore store(StoreConfig{}, std::make_shared<DeterministicEmbedder>(256, 0));
  FaqUpsert f;
  f.question = "How do I reset my router?";
  f.answer = std::string("Hold the reset button.");
  store.upsert(f);
  f = {};
  f.question = "What is the late payment fee?";
  store.upsert(f);
  ReplayPolicy policy;
  policy.selection = SelectionRule::Random;
  policy.seed = 77;
  ReplayOptions opt;
  opt.repetitions = 10;
  opt.parallelism = 4;
  std::string reports[2];
  std::uint64_t runs = 0;
  for (auto& r : reports) {
    const auto rows = compare_strategies(calls, store, {}, policy, default_profiles(), opt);
    std::ostringstream out;
    write_report(out, rows, ReportFormat::Csv);
    r = out.str();
    runs = rows.front().metrics.runs;
  }
  return {calls.size() == 10 && runs == 100 && reports[0] == reports[1] && !reports[0].empty(),
          std::to_string(calls.size()) + " transcripts x 10 reps = " + std::to_string(runs) + " runs per profile; reports " +
              (reports[0] == reports[1] ? "byte-identical" : "DIFFER")};
}

std::vector<std::pair<std::uint64_t, std::string>> event_frames(const std::string& stream) {
  std::vector<std::pair<std::uint64_t, std::string>> out;
  std::istringstream in(stream);
  std::string line;
  std::pair<std::uint64_t, std::string> cur;
  while (std::getline(in, line)) {
    if (line.rfind("id: ", 0) == 0) cur.first = std::stoull(line.substr(4));
    else if (line.rfind("event: ", 0) == 0) cur.second = line.substr(7);
    else if (line.empty() && cur.first) out.push_back(std::exchange(cur, {}));
  }
  return out;
}

Outcome service_integration() {
  constexpr const char* kAgent = "acceptance-agent";
  auto rt = build_runtime(AppConfig{}, true);
  auto store = rt.store;
  for (auto [q, a] : {std::pair<const char*, const char*>{"How do I reset my router?", "Hold reset."},
                      {"What is the late payment fee?", nullptr}}) {
    FaqUpsert f;
    f.question = q;
    if (a) f.answer = std::string(a);
    store->upsert(f);
  }
  ServiceSettings settings;
  settings.agent_token = kAgent;
  settings.supervisor_token = "acceptance-supervisor";
  settings.http_threads = 96;
  Service service(std::move(rt), settings);
  const int port = service.start();
  auto client = [&] {
    httplib::Client c("127.0.0.1", port);
    c.set_bearer_token_auth(kAgent);
    c.set_read_timeout(10, 0);
    return c;
  };

  constexpr int kSessions = 50, kTurns = 12, kInterval = 4;
  std::vector<std::string> ids(kSessions);
  std::atomic<int> failures{0}, auto_triggers{0}, selects{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < kSessions; ++i) {
    threads.emplace_back([&, i] {
      auto c = client();
      auto r = c.Post("/v1/sessions", json{{"trigger_interval", kInterval}}.dump(), "application/json");
      if (!r || r->status != 201) return void(++failures);
      ids[i] = json::parse(r->body)["session_id"];
      for (int t = 0; t < kTurns; ++t) {
        const std::string text = t % 4 == 0 ? "How do I reset my router?"
                                            : "What is the late payment fee on account " + std::to_string(i) + "?";
        auto tr = c.Post("/v1/sessions/" + ids[i] + "/turns",
                         json{{"speaker", t % 2 ? "agent" : "customer"}, {"text", text}}.dump(), "application/json");
        if (!tr || tr->status != 200) return void(++failures);
        auto_triggers += json::parse(tr->body)["triggered"].get<bool>();
      }
      auto set = c.Post("/v1/sessions/" + ids[i] + "/trigger", "{}", "application/json");
      if (!set || set->status != 200) return void(++failures);
      const auto suggestions = json::parse(set->body)["suggestions"];
      if (!suggestions.empty()) {
        auto sel = c.Post("/v1/sessions/" + ids[i] + "/select",
                          json{{"suggestion_id", suggestions[i % suggestions.size()]["id"]}}.dump(),
                          "application/json");
        if (!sel || sel->status != 200) return void(++failures);
        ++selects;
      }
    });
  }
  for (auto& t : threads) t.join();

  // Rounds run after the turn is acknowledged; wait for the streams to settle.
  std::size_t sets = 0, gaps = 0, bad_sessions = 0;
  const auto until = std::chrono::steady_clock::now() + 15s;
  for (const auto& sid : ids) {
    if (sid.empty()) continue;
    std::vector<std::pair<std::uint64_t, std::string>> ev;
    std::size_t n = 0;
    for (;;) {
      auto c = client();
      auto r = c.Get("/v1/sessions/" + sid + "/events?follow=false&last_seq=0");
      ev = r && r->status == 200 ? event_frames(r->body) : decltype(ev){};
      n = std::count_if(ev.begin(), ev.end(), [](const auto& e) { return e.second == "suggestion_set"; });
      if (n >= kTurns / kInterval + 1 || std::chrono::steady_clock::now() > until) break;
      std::this_thread::sleep_for(10ms);
    }
    for (std::size_t k = 0; k < ev.size(); ++k) gaps += ev[k].first != k + 1;
    bad_sessions += n != static_cast<std::size_t>(kTurns / kInterval + 1);
    sets += n;
  }

  auto c = client();
  auto mr = c.Get("/v1/metrics");
  const json m = mr && mr->status == 200 ? json::parse(mr->body) : json::object();
  const auto engine = service.metrics();
  service.stop();

  const auto& L = engine.ledger;
  const std::uint64_t manual = kSessions;
  const bool reconciled =
      !m.empty() && m["sets_emitted"] == sets && m["ledger"]["sets_produced"] == L.sets_produced &&
      L.sets_produced == sets && m["selections"]["faq"] == L.faq_selections &&
      m["selections"]["answerless_matched"] == L.answerless_matched_selections &&
      m["selections"]["generated"] == L.generated_selections &&
      L.faq_selections + L.answerless_matched_selections + L.generated_selections == selects.load() &&
      m["rag"]["calls_made"] == engine.rag.calls_made &&
      engine.rag.calls_made == L.answerless_matched_selections + L.generated_selections &&
      engine.rag.calls_bypassed == L.faq_selections && m["latency_ms"]["total"]["count"] == sets &&
      m["sessions_started"] == kSessions;
  const bool ok = failures == 0 && gaps == 0 && bad_sessions == 0 &&
                  sets == static_cast<std::size_t>(auto_triggers.load()) + manual && reconciled;
  return {ok, std::to_string(kSessions) + " sessions, " + std::to_string(auto_triggers.load()) + " auto + " +
                  std::to_string(manual) + " manual triggers -> " + std::to_string(sets) + " suggestion_set events, " +
                  std::to_string(gaps) + " sequence gaps, " + std::to_string(selects.load()) +
                  " selections, metrics " + (reconciled ? "reconciled" : "DO NOT reconcile")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"parallel-fan-out-latency", parallel_fan_out},
      {"vector-search-latency", vector_search_latency},
      {"suggestion-set-properties", set_properties},
      {"cost-bypass-accounting", cost_bypass},
      {"mining-recovery", mining_recovery},
      {"kmeans-correctness", kmeans_correctness},
      {"persistence-fidelity", persistence},
      {"simulation-protocol", simulation_protocol},
      {"service-integration", service_integration},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    const double ms = wall_ms([&] {
      try {
        o = run();
      } catch (const std::exception& e) {
        o = {false, std::string("threw: ") + e.what()};
      }
    });
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(ms / 1000.0) << " s]"
              << std::endl;
  }
  return failed ? 1 : 0;
}
