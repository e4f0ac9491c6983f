#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "faqpilot/cli.hpp"
#include "faqpilot/error.hpp"
#include "faqpilot/json_codec.hpp"
#include "faqpilot/kmeans.hpp"
#include "faqpilot/mining.hpp"
#include "faqpilot/scripted_responders.hpp"
#include "faqpilot/simulator.hpp"
#include "faqpilot/suggestion_engine.hpp"
#include "faqpilot/synth_corpus.hpp"

namespace py = pybind11;
using namespace faqpilot;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

std::shared_ptr<FaqStore> make_store(std::size_t dim, std::uint64_t seed, double dedup,
                                     std::optional<std::filesystem::path> snapshot) {
  StoreConfig sc;
  sc.dim = dim;
  sc.dedup_threshold = dedup;
  sc.snapshot_path = std::move(snapshot);
  return FaqStore::open(sc, std::make_shared<DeterministicEmbedder>(dim, seed));
}

nlohmann::json metrics_json(const ReplayMetrics& m) {
  auto lat = [](const LatencySummary& s) {
    return nlohmann::json{{"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}, {"max_ms", s.max_ms}, {"samples", s.samples}};
  };
  return {{"runs", m.runs},
          {"suggestion_sets", m.suggestion_sets},
          {"matched_suggested", m.matched_suggested},
          {"generated_suggested", m.generated_suggested},
          {"faq_selected", m.faq_selected},
          {"answerless_selected", m.answerless_selected},
          {"generated_selected", m.generated_selected},
          {"rag_calls_made", m.rag_calls_made},
          {"rag_calls_bypassed", m.rag_calls_bypassed},
          {"rag_failures", m.rag_failures},
          {"degraded", m.degraded},
          {"invariant_violations", m.invariant_violations},
          {"match_latency", lat(m.match_latency)},
          {"generate_latency", lat(m.generate_latency)},
          {"end_to_end", lat(m.end_to_end)}};
}

ReplayPolicy make_policy(const std::string& selection, const std::string& trigger, std::uint64_t seed) {
  ReplayPolicy p;
  p.selection = parse_selection_rule(selection);
  p.seed = seed;
  return parse_trigger_plan(trigger, p);
}

// Engine over scripted providers and a caller-owned store.
class ScriptedEngine {
 public:
  explicit ScriptedEngine(std::shared_ptr<FaqStore> store) {
    auto clock = steady_clock();
    auto gateway = std::make_shared<LlmGateway>(std::make_shared<ScriptedProvider>(scripted::offline_behavior(), clock));
    auto rag = std::make_shared<RagClient>(std::make_shared<ScriptedRagBackend>(ScriptedRagBehavior{}, clock), clock);
    engine_ = std::make_unique<SuggestionEngine>(
        EngineDeps{std::move(store), gateway, rag, std::make_shared<PromptLibrary>(PromptLibrary::defaults()), clock});
  }

  Session new_session(const std::string& id, std::size_t trigger_interval, const std::string& match_strategy) {
    EngineConfig cfg;
    cfg.trigger_interval = trigger_interval;
    cfg.match_strategy = parse_match_strategy(match_strategy);
    cfg.validate();
    return engine_->new_session(id, cfg);
  }

  py::object suggest(Session& s, bool manual) {
    return to_py(engine_->suggest(s, manual ? TriggerMode::Manual : TriggerMode::Auto));
  }
  py::object select(Session& s, const std::string& id) { return to_py(engine_->select(s, id)); }
  py::object tag(Session& s, const std::string& id) { return to_py(engine_->tag_as_faq(s, id)); }
  py::object ledger() const {
    nlohmann::json j = engine_->ledger();
    j["rag"] = engine_->rag().counters();
    return to_py(j);
  }

 private:
  std::unique_ptr<SuggestionEngine> engine_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core: FAQ store, suggestion engine, mining and replay.";

  static py::handle error_type = py::exception<Error>(m, "Error").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("cosine", &cosine, py::arg("a"), py::arg("b"));

  py::class_<DeterministicEmbedder, std::shared_ptr<DeterministicEmbedder>>(m, "DeterministicEmbedder")
      .def(py::init<std::size_t, std::uint64_t>(), py::arg("dim") = 256, py::arg("seed") = 0)
      .def_property_readonly("dim", &DeterministicEmbedder::dim)
      .def("embed", &DeterministicEmbedder::embed, py::arg("text"))
      .def("embed_batch", &DeterministicEmbedder::embed_batch, py::arg("texts"));

  py::class_<FaqEntry>(m, "FaqEntry")
      .def_readonly("qid", &FaqEntry::qid)
      .def_readonly("question", &FaqEntry::question)
      .def_readonly("answer", &FaqEntry::answer)
      .def_readonly("frequency", &FaqEntry::frequency)
      .def_property_readonly("source", [](const FaqEntry& e) { return std::string(to_string(e.source)); })
      .def_readonly("embedding", &FaqEntry::embedding)
      .def_readonly("created_at_ms", &FaqEntry::created_at_ms)
      .def_readonly("updated_at_ms", &FaqEntry::updated_at_ms)
      .def("__eq__", [](const FaqEntry& a, const FaqEntry& b) { return a == b; })
      .def("__repr__", [](const FaqEntry& e) { return "<FaqEntry " + e.qid + " " + e.question + ">"; });

  py::class_<FaqStore, std::shared_ptr<FaqStore>>(m, "FaqStore")
      .def(py::init(&make_store), py::arg("dim") = 256, py::arg("seed") = 0, py::arg("dedup_threshold") = 0.95,
           py::arg("snapshot") = std::nullopt)
      .def(
          "upsert",
          [](FaqStore& s, std::optional<std::string> question, std::optional<std::string> answer,
             std::optional<std::string> qid, std::optional<std::uint64_t> frequency,
             std::optional<std::string> source, bool clear_answer) {
            FaqUpsert f;
            f.qid = std::move(qid);
            f.question = std::move(question);
            f.answer = std::move(answer);
            f.frequency = frequency;
            if (source) f.source = parse_faq_source(*source);
            f.clear_answer = clear_answer;
            return s.upsert(f);
          },
          py::arg("question") = std::nullopt, py::arg("answer") = std::nullopt, py::arg("qid") = std::nullopt,
          py::arg("frequency") = std::nullopt, py::arg("source") = std::nullopt, py::arg("clear_answer") = false)
      .def("remove", &FaqStore::remove, py::arg("qid"))
      .def("get", &FaqStore::get, py::arg("qid"))
      .def("find", &FaqStore::find, py::arg("qid"))
      .def(
          "search",
          [](const FaqStore& s, const std::string& text, std::size_t k, double min_score) {
            std::vector<std::tuple<std::string, std::string, double>> out;
            for (auto& hit : s.search(s.embedder().embed(text), k, min_score)) {
              out.emplace_back(hit.qid, hit.question, hit.score);
            }
            return out;
          },
          py::arg("text"), py::arg("k") = 5, py::arg("min_score") = -1.0)
      .def(
          "tag_runtime",
          [](FaqStore& s, const std::string& q, const std::string& a) {
            const auto r = s.tag_runtime(q, a);
            return std::make_tuple(r.qid, r.merged);
          },
          py::arg("question"), py::arg("answer"))
      .def(
          "import_csv",
          [](FaqStore& s, const std::filesystem::path& p) {
            const auto r = s.import_csv(p);
            std::vector<std::tuple<std::size_t, std::string>> errors;
            for (const auto& e : r.errors) errors.emplace_back(e.line, e.message);
            return std::make_tuple(r.count, errors);
          },
          py::arg("path"))
      .def("export_csv", &FaqStore::export_csv, py::arg("path"))
      .def("persist", &FaqStore::persist, py::arg("path"))
      .def("load", &FaqStore::load, py::arg("path"))
      .def("entries", &FaqStore::entries)
      .def("__len__", &FaqStore::size);

  m.def(
      "kmeans",
      [](const std::vector<Vector>& points, std::size_t k, std::size_t max_iter, std::uint64_t seed,
         std::size_t n_init) {
        const auto r = kmeans(points, {k, max_iter, seed, n_init});
        py::dict d;
        d["assignments"] = r.assignments;
        d["centroids"] = r.centroids;
        d["objective"] = r.objective;
        d["objective_trace"] = r.objective_trace;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("points"), py::arg("k"), py::arg("max_iter") = 100, py::arg("seed") = 0, py::arg("n_init") = 1);

  py::class_<Conversation>(m, "Conversation")
      .def_readonly("id", &Conversation::id)
      .def_property_readonly("turns",
                             [](const Conversation& c) {
                               std::vector<std::tuple<std::string, std::string>> out;
                               for (const auto& t : c.turns) out.emplace_back(std::string(to_string(t.speaker)), t.text);
                               return out;
                             })
      .def("__len__", &Conversation::size);

  m.def(
      "synth_corpus",
      [](std::size_t calls, std::optional<std::vector<std::pair<std::string, std::size_t>>> intents,
         std::uint64_t seed, double noise, std::size_t max_questions) {
        CorpusSpec spec;
        spec.num_calls = calls;
        spec.noise_rate = noise;
        spec.max_questions_per_call = max_questions;
        if (intents) {
          for (auto& [q, f] : *intents) spec.intents.push_back({q, f});
        } else {
          spec.intents = default_intents();
        }
        return synth_corpus(spec, seed);
      },
      py::arg("calls") = 500, py::arg("intents") = std::nullopt, py::arg("seed") = 0, py::arg("noise") = 0.3,
      py::arg("max_questions") = 3);
  m.def("load_transcripts", &load_transcripts, py::arg("path"));
  m.def("save_transcripts", &save_transcripts, py::arg("path"), py::arg("calls"));

  m.def(
      "replay",
      [](const std::vector<Conversation>& calls, const FaqStore& store, const std::string& policy, std::size_t reps,
         std::uint64_t seed, const std::string& trigger, const std::string& profile) {
        const auto p = profile.empty() ? StrategyProfile{"replay", MatchStrategy::LlmRerank, {}, {}, {}, true, {}}
                                       : parse_profile(profile);
        ReplayOptions opt;
        opt.repetitions = reps;
        return to_py(metrics_json(replay(calls, store, {}, make_policy(policy, trigger, seed), p, opt)));
      },
      py::arg("calls"), py::arg("store"), py::arg("policy") = "prefer_matched_else_generated", py::arg("reps") = 1,
      py::arg("seed") = 0, py::arg("trigger") = "auto", py::arg("profile") = "");

  m.def(
      "compare",
      [](const std::vector<Conversation>& calls, const FaqStore& store, std::vector<std::string> profiles,
         const std::string& policy, std::size_t reps, std::uint64_t seed, const std::string& format) {
        std::vector<StrategyProfile> ps;
        for (const auto& s : profiles) ps.push_back(parse_profile(s));
        if (ps.empty()) ps = default_profiles();
        ReplayOptions opt;
        opt.repetitions = reps;
        std::ostringstream out;
        write_report(out, compare_strategies(calls, store, {}, make_policy(policy, "auto", seed), ps, opt),
                     parse_report_format(format));
        return out.str();
      },
      py::arg("calls"), py::arg("store"), py::arg("profiles") = std::vector<std::string>{},
      py::arg("policy") = "prefer_matched_else_generated", py::arg("reps") = 1, py::arg("seed") = 0,
      py::arg("format") = "csv");

  m.def(
      "mine",
      [](const std::vector<Conversation>& calls, FaqStore& store, std::size_t k, std::size_t top_n,
         std::uint64_t seed, bool review) {
        MiningConfig cfg;
        cfg.k = k;
        cfg.top_n = top_n;
        cfg.kmeans_seed = seed;
        cfg.review_enabled = review;
        cfg.validate();
        LlmGateway gateway(std::make_shared<ScriptedProvider>(scripted::offline_behavior()));
        RagClient rag(std::make_shared<ScriptedRagBackend>(ScriptedRagBehavior{}));
        const auto report =
            run_pipeline(calls, cfg, gateway, PromptLibrary::defaults(), store.embedder(), rag, store);
        return to_py(report.to_json());
      },
      py::arg("calls"), py::arg("store"), py::arg("k") = 85, py::arg("top_n") = 100, py::arg("seed") = 0,
      py::arg("review") = true);

  py::class_<Session>(m, "Session")
      .def_readonly("id", &Session::id)
      .def(
          "add_turn",
          [](Session& s, const std::string& speaker, const std::string& text) {
            s.conversation = append_turn(s.conversation, parse_speaker(speaker), text);
            return s.conversation.last_index();
          },
          py::arg("speaker"), py::arg("text"))
      .def_property_readonly("turns", [](const Session& s) { return s.conversation.size(); })
      .def_property_readonly("due", [](const Session& s) { return SuggestionEngine::should_trigger(s, TriggerMode::Auto); });

  py::class_<ScriptedEngine>(m, "Engine")
      .def(py::init<std::shared_ptr<FaqStore>>(), py::arg("store"))
      .def("new_session", &ScriptedEngine::new_session, py::arg("id"), py::arg("trigger_interval") = 4,
           py::arg("match_strategy") = "llm_rerank")
      .def("suggest", &ScriptedEngine::suggest, py::arg("session"), py::arg("manual") = true)
      .def("select", &ScriptedEngine::select, py::arg("session"), py::arg("suggestion_id"))
      .def("tag_as_faq", &ScriptedEngine::tag, py::arg("session"), py::arg("suggestion_id"))
      .def("ledger", &ScriptedEngine::ledger);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"));
}
