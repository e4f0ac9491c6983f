#include "faqpilot/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "faqpilot/error.hpp"
#include "faqpilot/scripted_responders.hpp"

namespace faqpilot {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

// Object accessor that rejects keys it was not asked about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_ + " must be an object");
  }
  Section(const Section&) = delete;
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) bad("unknown key " + path_ + "." + key);
    }
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = get(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        bad(path_ + "." + key + " has the wrong type");
      }
    }
  }

  void read_ms(const std::string& key, Duration& out) {
    std::int64_t ms = -1;
    read(key, ms);
    if (ms >= 0) out = milliseconds(ms);
    else if (get(key)) bad(path_ + "." + key + " must be >= 0");
  }

  void read_path(const std::string& key, std::optional<std::filesystem::path>& out,
                 const std::filesystem::path& base) {
    std::string s;
    read(key, s);
    if (s.empty()) return;
    std::filesystem::path p(s);
    out = p.is_absolute() || base.empty() ? p : base / p;
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

BackendConfig read_backend(const json& j, const std::string& name) {
  Section s(j, name);
  BackendConfig b;
  std::string kind = "scripted";
  s.read("kind", kind);
  if (kind == "remote") b.remote = true;
  else if (kind != "scripted") bad(name + ".kind must be scripted or remote");
  s.read("endpoint", b.endpoint);
  s.read("model", b.model);
  s.read("credential_env", b.credential_env);
  s.read_ms("latency_ms", b.latency);
  s.read("max_concurrency", b.max_concurrency);
  return b;
}

void validate_backend(const BackendConfig& b, const std::string& name) {
  if (b.remote && b.endpoint.empty()) bad(name + ": a remote backend needs an endpoint");
  if (b.max_concurrency < 1) bad(name + ".max_concurrency must be >= 1");
}

}  // namespace

void AppConfig::validate() const {
  if (host.empty()) bad("listen.host is empty");
  if (port < 0 || port > 65535) bad("listen.port out of range");
  if (http_threads < 2) bad("listen.http_threads must be >= 2");
  if (round_workers < 1) bad("listen.round_workers must be >= 1");
  engine.validate();
  validate_backend(llm, "llm");
  if (match_llm) validate_backend(*match_llm, "match_llm");
  validate_backend(rag, "rag");
  if (embedding_dim < 8) bad("embedder.dim must be >= 8");
  if (remote_embedder && embedder_endpoint.empty()) bad("embedder: a remote embedder needs an endpoint");
  if (!(store_dedup_threshold > 0.0 && store_dedup_threshold <= 1.0)) bad("store.dedup_threshold must lie in (0, 1]");
  mining.validate();
  if (agent_token_env.empty() || supervisor_token_env.empty()) bad("auth token variables must be named");
}

AppConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  AppConfig c;
  {
    Section top(root, "config");
    if (const json* j = top.get("listen")) {
      Section s(*j, "listen");
      s.read("host", c.host);
      s.read("port", c.port);
      s.read("http_threads", c.http_threads);
      s.read("round_workers", c.round_workers);
    }
    if (const json* j = top.get("engine")) {
      Section s(*j, "engine");
      auto& e = c.engine;
      s.read("window_size", e.window_size);
      s.read("trigger_interval", e.trigger_interval);
      s.read_ms("deadline_ms", e.deadline);
      s.read("match_shortlist", e.match_shortlist);
      s.read("match_min_score", e.match_min_score);
      s.read("dedup_threshold", e.dedup_threshold);
      std::string strategy;
      s.read("match_strategy", strategy);
      if (!strategy.empty()) {
        try {
          e.match_strategy = parse_match_strategy(strategy);
        } catch (const Error& err) {
          bad(err.what());
        }
      }
      s.read("parallel_stages", e.parallel_stages);
    }
    if (const json* j = top.get("llm")) c.llm = read_backend(*j, "llm");
    if (const json* j = top.get("match_llm")) c.match_llm = read_backend(*j, "match_llm");
    if (const json* j = top.get("rag")) c.rag = read_backend(*j, "rag");
    if (const json* j = top.get("embedder")) {
      Section s(*j, "embedder");
      std::string kind = "deterministic";
      s.read("kind", kind);
      if (kind == "remote") c.remote_embedder = true;
      else if (kind != "deterministic") bad("embedder.kind must be deterministic or remote");
      s.read("dim", c.embedding_dim);
      s.read("seed", c.embedding_seed);
      s.read("endpoint", c.embedder_endpoint);
      s.read("credential_env", c.embedder_credential_env);
    }
    if (const json* j = top.get("store")) {
      Section s(*j, "store");
      s.read_path("snapshot", c.store_snapshot, base_dir);
      s.read("dedup_threshold", c.store_dedup_threshold);
    }
    top.read_path("prompts_dir", c.prompts_dir, base_dir);
    if (const json* j = top.get("mining")) {
      Section s(*j, "mining");
      auto& m = c.mining;
      s.read("k", m.k);
      s.read("critic_batch", m.critic_batch);
      s.read("top_n", m.top_n);
      s.read("kmeans_max_iter", m.kmeans_max_iter);
      s.read("kmeans_seed", m.kmeans_seed);
      s.read("kmeans_n_init", m.kmeans_n_init);
      s.read_path("cache_dir", m.cache_dir, base_dir);
      s.read("review", m.review_enabled);
      s.read("concurrency", m.concurrency);
      s.read_ms("llm_deadline_ms", m.llm_deadline);
      s.read_ms("rag_deadline_ms", m.rag_deadline);
      s.read("extract_failure_limit", m.extract_failure_limit);
      s.read("max_transcript_chars", m.max_transcript_chars);
    }
    if (const json* j = top.get("auth")) {
      Section s(*j, "auth");
      s.read("agent_token_env", c.agent_token_env);
      s.read("supervisor_token_env", c.supervisor_token_env);
    }
  }
  try {
    c.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    bad(e.what());
  }
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string resolve_secret(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v || !*v) bad("environment variable " + name + " is not set");
  return v;
}

namespace {

std::shared_ptr<ChatProvider> provider_from(const BackendConfig& b, bool force_scripted,
                                            const std::shared_ptr<const Clock>& clock) {
  ProviderSpec spec;
  spec.max_concurrency = b.max_concurrency;
  if (b.remote && !force_scripted) {
    spec.kind = ProviderKind::Remote;
    spec.model_id = b.model;
    spec.endpoint = b.endpoint;
    if (!b.credential_env.empty()) spec.credential = resolve_secret(b.credential_env);
  } else {
    spec.kind = ProviderKind::Scripted;
    spec.script = scripted::offline_behavior();
    spec.script.injected_latency = b.latency;
  }
  return make_provider(spec, clock);
}

}  // namespace

Runtime build_runtime(const AppConfig& config, bool force_scripted, std::shared_ptr<const Clock> clock) {
  config.validate();
  Runtime rt;
  rt.clock = clock;

  EmbedderSpec es;
  es.dim = config.embedding_dim;
  es.seed = config.embedding_seed;
  if (config.remote_embedder && !force_scripted) {
    es.kind = EmbedderKind::Remote;
    es.endpoint = config.embedder_endpoint;
    if (!config.embedder_credential_env.empty()) es.credential = resolve_secret(config.embedder_credential_env);
  }
  rt.embedder = make_embedder(es);

  StoreConfig sc;
  sc.dim = config.embedding_dim;
  sc.dedup_threshold = config.store_dedup_threshold;
  sc.snapshot_path = config.store_snapshot;
  rt.store = FaqStore::open(std::move(sc), rt.embedder);

  rt.gateway = std::make_shared<LlmGateway>(provider_from(config.llm, force_scripted, clock), clock,
                                            config.llm.max_concurrency);
  if (config.match_llm) rt.gateway->set_role_provider(Role::Match, provider_from(*config.match_llm, force_scripted, clock));

  std::shared_ptr<RagBackend> backend;
  if (config.rag.remote && !force_scripted) {
    const std::string cred = config.rag.credential_env.empty() ? "" : resolve_secret(config.rag.credential_env);
    backend = std::make_shared<RemoteRagBackend>(config.rag.endpoint, cred, clock);
  } else {
    ScriptedRagBehavior rb;
    rb.injected_latency = config.rag.latency;
    backend = std::make_shared<ScriptedRagBackend>(std::move(rb), clock);
  }
  rt.rag = std::make_shared<RagClient>(std::move(backend), clock);

  rt.prompts = std::make_shared<const PromptLibrary>(config.prompts_dir ? PromptLibrary::load_dir(*config.prompts_dir)
                                                                        : PromptLibrary::defaults());
  return rt;
}

}  // namespace faqpilot
