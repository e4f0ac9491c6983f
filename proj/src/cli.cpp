#include "faqpilot/cli.hpp"

#include <CLI11.hpp>
#include <pthread.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "faqpilot/config.hpp"
#include "faqpilot/error.hpp"
#include "faqpilot/mining.hpp"
#include "faqpilot/service.hpp"
#include "faqpilot/simulator.hpp"
#include "faqpilot/synth_corpus.hpp"

namespace faqpilot {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool scripted = false;
  CLI::Option* seed_opt = nullptr;

  [[nodiscard]] bool seeded() const { return seed_opt && seed_opt->count() > 0; }

  [[nodiscard]] AppConfig load() const { return config.empty() ? AppConfig{} : load_config(config); }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file");
  c.seed_opt = sub->add_option("--seed", c.seed, "Seed for synthetic data, clustering and random selection");
  sub->add_flag("--scripted", c.scripted, "Replace every remote backend with its offline stand-in");
}

// Usage-time check that reuses a library parser.
template <typename Parse>
CLI::Validator parsed_by(Parse parse, std::string name) {
  return CLI::Validator(
      [parse](std::string& value) -> std::string {
        try {
          (void)parse(value);
          return {};
        } catch (const Error& e) {
          return e.what();
        }
      },
      "", std::move(name));
}

struct ServeArgs {
  Common common;
  std::optional<std::string> host;
  std::optional<int> port;
  bool check = false;
};

struct MineArgs {
  Common common;
  std::string in;
  std::optional<std::size_t> k, top, concurrency;
  std::string out_csv, report, cache_dir;
  bool no_review = false;
};

struct ReplayArgs {
  Common common;
  std::string transcripts, faqs, policy = "prefer_matched_else_generated", trigger = "auto", report,
                                 format = "table";
  std::vector<std::string> profiles;
  std::size_t reps = 1;
  std::size_t parallel = 1;
  bool real_time = false;
};

struct SynthArgs {
  Common common;
  std::size_t calls = 500;
  std::string intents, out;
  double noise = 0.3;
  std::size_t max_questions = 3;
};

struct ImportArgs {
  Common common;
  std::string csv, store;
};

int serve(const ServeArgs& a, std::ostream& out) {
  AppConfig cfg = a.common.load();
  if (a.host) cfg.host = *a.host;
  if (a.port) cfg.port = *a.port;
  cfg.validate();
  const auto settings = service_settings(cfg);
  Runtime rt = build_runtime(cfg, a.common.scripted);
  if (a.check) {
    out << "config ok: " << rt.store->size() << " FAQs, listening address " << cfg.host << ":" << cfg.port << "\n";
    return kExitOk;
  }

  // Block the stop signals everywhere so one thread can sigwait for them.
  sigset_t stop_signals, previous;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, &previous);

  Service service(std::move(rt), settings);
  const int port = service.start();
  out << "listening on " << cfg.host << ":" << port << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    service.stop();
  });
  service.wait();
  waiter.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  out << "stopped" << std::endl;
  return kExitOk;
}

int mine(const MineArgs& a, std::ostream& out, std::ostream& err) {
  AppConfig cfg = a.common.load();
  if (a.k) cfg.mining.k = *a.k;
  if (a.top) cfg.mining.top_n = *a.top;
  if (a.concurrency) cfg.mining.concurrency = *a.concurrency;
  if (!a.cache_dir.empty()) cfg.mining.cache_dir = fs::path(a.cache_dir);
  if (a.no_review) cfg.mining.review_enabled = false;
  if (a.common.seeded()) cfg.mining.kmeans_seed = a.common.seed;
  cfg.validate();

  Runtime rt = build_runtime(cfg, a.common.scripted);
  const auto transcripts = load_transcripts(a.in);
  const auto report = run_pipeline(transcripts, cfg.mining, *rt.gateway, *rt.prompts, *rt.embedder, *rt.rag, *rt.store);

  for (const auto& st : report.stages) {
    for (const auto& w : st.warnings) err << "warning: " << st.name << ": " << w << "\n";
  }
  out << "transcripts " << report.transcripts << ", k " << report.effective_k << ", critic batches "
      << report.critic_batches << ", stored " << report.stored << ", answered " << report.answered << "\n";
  std::size_t rank = 0;
  for (const auto& r : report.top) out << ++rank << "\t" << r.frequency << "\t" << r.qid << "\t" << r.text << "\n";

  if (!a.report.empty()) write_report(fs::path(a.report), report);
  if (!a.out_csv.empty()) rt.store->export_csv(a.out_csv);
  return kExitOk;
}

std::shared_ptr<FaqStore> replay_store(const Runtime& rt, const std::string& faqs) {
  if (faqs.empty()) return rt.store;
  StoreConfig sc;
  sc.dim = rt.embedder->dim();
  auto store = std::make_shared<FaqStore>(sc, rt.embedder);
  const auto result = store->import_csv(faqs);
  if (!result.errors.empty()) {
    const auto& e = result.errors.front();
    throw Error(ErrorCode::MalformedRow, faqs + " line " + std::to_string(e.line) + ": " + e.message);
  }
  return store;
}

int replay_or_compare(const ReplayArgs& a, bool compare, std::ostream& out) {
  AppConfig cfg = a.common.load();
  Runtime rt = build_runtime(cfg, a.common.scripted);
  auto store = replay_store(rt, a.faqs);
  const auto transcripts = load_transcripts(a.transcripts);

  ReplayPolicy policy = parse_trigger_plan(a.trigger);
  policy.selection = parse_selection_rule(a.policy);
  if (a.common.seeded()) policy.seed = a.common.seed;
  ReplayOptions opt;
  opt.repetitions = a.reps;
  opt.parallelism = a.parallel;
  opt.virtual_time = !a.real_time;
  const auto format = parse_report_format(a.format);

  std::vector<ProfileResult> rows;
  if (compare) {
    std::vector<StrategyProfile> profiles;
    for (const auto& p : a.profiles) profiles.push_back(parse_profile(p));
    if (profiles.empty()) profiles = default_profiles();
    rows = compare_strategies(transcripts, *store, cfg.engine, policy, profiles, opt);
  } else {
    if (a.profiles.size() > 1) throw Error(ErrorCode::InvalidArgument, "replay takes one --profile; use compare");
    StrategyProfile profile = a.profiles.empty() ? StrategyProfile{"replay", cfg.engine.match_strategy, {}, {}, {}, true, std::nullopt}
                                                 : parse_profile(a.profiles.front());
    if (a.profiles.empty()) profile.parallel_stages = cfg.engine.parallel_stages;
    rows.push_back({profile, replay(transcripts, *store, cfg.engine, policy, profile, opt)});
  }

  if (a.report.empty()) write_report(out, rows, format);
  else emit_report(a.report, rows, format);
  for (const auto& r : rows) {
    if (r.metrics.invariant_violations) {
      throw Error(ErrorCode::InvalidArgument, r.profile.label + ": " + std::to_string(r.metrics.invariant_violations) +
                                                  " suggestion sets broke an invariant");
    }
  }
  return kExitOk;
}

int synth(const SynthArgs& a, std::ostream& out) {
  CorpusSpec spec;
  spec.num_calls = a.calls;
  spec.noise_rate = a.noise;
  spec.max_questions_per_call = a.max_questions;
  spec.intents = a.intents.empty() ? default_intents() : load_intents(a.intents);
  const auto calls = synth_corpus(spec, a.common.seed);
  save_transcripts(a.out, calls);
  out << "wrote " << calls.size() << " calls to " << a.out << "\n";
  return kExitOk;
}

std::unique_ptr<FaqStore> open_store(const Common& common, const std::string& path_flag, bool must_exist) {
  const AppConfig cfg = common.load();
  std::optional<fs::path> path = cfg.store_snapshot;
  if (!path_flag.empty()) path = fs::path(path_flag);
  if (!path) throw Error(ErrorCode::InvalidArgument, "no store snapshot: pass --store or set store.snapshot");
  if (must_exist && !fs::exists(*path)) throw Error(ErrorCode::StorageIo, "no snapshot at " + path->string());
  StoreConfig sc;
  sc.dim = cfg.embedding_dim;
  sc.dedup_threshold = cfg.store_dedup_threshold;
  sc.snapshot_path = path;
  return FaqStore::open(std::move(sc), build_runtime(cfg, common.scripted).embedder);
}

int faq_import(const ImportArgs& a, std::ostream& out, std::ostream& err) {
  auto store = open_store(a.common, a.store, false);
  const auto result = store->import_csv(a.csv);
  store->persist(*store->config().snapshot_path);
  out << "imported " << result.count << " rows; store holds " << store->size() << " FAQs\n";
  for (const auto& e : result.errors) err << a.csv << " line " << e.line << ": " << e.message << "\n";
  return result.errors.empty() ? kExitOk : kExitFailure;
}

int faq_export(const ImportArgs& a, std::ostream& out) {
  auto store = open_store(a.common, a.store, true);
  const auto n = store->export_csv(a.csv);
  out << "exported " << n << " rows to " << a.csv << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Real-time FAQ suggestions for contact-center agents", "faqpilot"};
  app.require_subcommand(1, 1);

  ServeArgs serve_args;
  auto* s = app.add_subcommand("serve", "Run the HTTP API");
  add_common(s, serve_args.common);
  s->add_option("--host", serve_args.host, "Listen address (overrides config)");
  s->add_option("--port", serve_args.port, "Listen port (overrides config)")->check(CLI::Range(0, 65535));
  s->add_flag("--check", serve_args.check, "Validate config and providers, then exit without listening");

  MineArgs mine_args;
  auto* m = app.add_subcommand("mine", "Mine FAQs from call transcripts into the store");
  add_common(m, mine_args.common);
  m->add_option("--in", mine_args.in, "Transcript file or directory of *.jsonl")->required();
  m->add_option("--k", mine_args.k, "Number of clusters")->check(CLI::PositiveNumber);
  m->add_option("--top", mine_args.top, "FAQs to keep")->check(CLI::PositiveNumber);
  m->add_option("--concurrency", mine_args.concurrency, "Parallel LLM calls")->check(CLI::PositiveNumber);
  m->add_option("--cache-dir", mine_args.cache_dir, "Stage cache directory");
  m->add_flag("--no-review", mine_args.no_review, "Skip the final review stage");
  m->add_option("--out", mine_args.out_csv, "Export the resulting store as CSV");
  m->add_option("--report", mine_args.report, "Write the stage report as JSON");

  ReplayArgs replay_args, compare_args;
  auto add_replay_opts = [](CLI::App* sub, ReplayArgs& r) {
    add_common(sub, r.common);
    sub->add_option("--transcripts", r.transcripts, "Transcript file or directory of *.jsonl")->required();
    sub->add_option("--faqs", r.faqs, "FAQ CSV to replay against (default: the configured store)");
    sub->add_option("--reps", r.reps, "Repetitions per transcript")->check(CLI::PositiveNumber);
    sub->add_option("--policy", r.policy,
                    "always_first_matched, always_first_generated, prefer_matched_else_generated (mixed), random, none")
        ->check(parsed_by([](const std::string& v) { return parse_selection_rule(v); }, "POLICY"));
    sub->add_option("--trigger", r.trigger, "auto, every:K or manual:I,J,...")
        ->check(parsed_by([](const std::string& v) { return parse_trigger_plan(v); }, "TRIGGER"));
    sub->add_option("--parallel", r.parallel, "Concurrent replays")->check(CLI::PositiveNumber);
    sub->add_flag("--real-time", r.real_time, "Measure wall-clock latency instead of simulated time");
    sub->add_option("--report", r.report, "Write the report here instead of stdout");
    sub->add_option("--format", r.format, "csv or table")
        ->check(parsed_by([](const std::string& v) { return parse_report_format(v); }, "FORMAT"));
  };
  auto* r = app.add_subcommand("replay", "Replay transcripts through the engine and report metrics");
  add_replay_opts(r, replay_args);
  const auto profile_check = parsed_by([](const std::string& v) { return parse_profile(v); }, "PROFILE");
  r->add_option("--profile", replay_args.profiles, "label:strategy:llm_ms[:rag_ms[:serial|parallel[:deadline_ms]]]")
      ->check(profile_check);
  auto* c = app.add_subcommand("compare", "Replay under several latency profiles side by side");
  add_replay_opts(c, compare_args);
  c->add_option("--profile", compare_args.profiles, "Repeatable; defaults to vector_only, parallel_small, serial_large")
      ->check(profile_check);

  SynthArgs synth_args;
  auto* y = app.add_subcommand("synth", "Generate synthetic transcripts with planted questions");
  add_common(y, synth_args.common);
  y->add_option("--calls", synth_args.calls, "Number of calls")->check(CLI::PositiveNumber);
  y->add_option("--intents", synth_args.intents, "question,frequency CSV (default: built-in set)");
  y->add_option("--noise", synth_args.noise, "Probability of greeting and verification chatter")
      ->check(CLI::Range(0.0, 1.0));
  y->add_option("--max-questions", synth_args.max_questions, "Planted questions per call")
      ->check(CLI::PositiveNumber);
  y->add_option("--out", synth_args.out, "Output .jsonl file")->required();

  ImportArgs import_args, export_args;
  auto* fi = app.add_subcommand("faq-import", "Load FAQs from CSV into a store snapshot");
  add_common(fi, import_args.common);
  fi->add_option("--csv", import_args.csv, "Input CSV")->required();
  fi->add_option("--store", import_args.store, "Snapshot path (default: store.snapshot from config)");
  auto* fe = app.add_subcommand("faq-export", "Write a store snapshot out as CSV");
  add_common(fe, export_args.common);
  fe->add_option("--csv", export_args.csv, "Output CSV")->required();
  fe->add_option("--store", export_args.store, "Snapshot path (default: store.snapshot from config)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return serve(serve_args, out);
    if (*m) return mine(mine_args, out, err);
    if (*r) return replay_or_compare(replay_args, false, out);
    if (*c) return replay_or_compare(compare_args, true, out);
    if (*y) return synth(synth_args, out);
    if (*fi) return faq_import(import_args, out, err);
    if (*fe) return faq_export(export_args, out);
  } catch (const Error& e) {
    err << "faqpilot: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "faqpilot: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace faqpilot
