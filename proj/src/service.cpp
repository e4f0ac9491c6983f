#include "faqpilot/service.hpp"

#include <httplib.h>

#include <atomic>
#include <cstdio>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "faqpilot/error.hpp"
#include "faqpilot/json_codec.hpp"
#include "faqpilot/text.hpp"

namespace faqpilot {

std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::SuggestionSet: return "suggestion_set";
    case EventKind::Answer: return "answer";
    case EventKind::FaqTagged: return "faq_tagged";
    case EventKind::DegradedNotice: return "degraded_notice";
  }
  return "suggestion_set";
}

void ServiceSettings::validate() const {
  if (host.empty()) throw Error(ErrorCode::InvalidConfig, "listen host is empty");
  if (port < 0 || port > 65535) throw Error(ErrorCode::InvalidConfig, "listen port out of range");
  if (http_threads < 2) throw Error(ErrorCode::InvalidConfig, "http_threads must be >= 2");
  if (round_workers < 1) throw Error(ErrorCode::InvalidConfig, "round_workers must be >= 1");
  if (event_buffer < 1) throw Error(ErrorCode::InvalidConfig, "event buffer must hold at least one event");
  if (agent_token.empty() || supervisor_token.empty()) {
    throw Error(ErrorCode::InvalidConfig, "both bearer tokens must be configured");
  }
  if (agent_token == supervisor_token) throw Error(ErrorCode::InvalidConfig, "agent and supervisor tokens must differ");
  engine.validate();
}

ServiceSettings service_settings(const AppConfig& config) {
  ServiceSettings s;
  s.host = config.host;
  s.port = config.port;
  s.http_threads = config.http_threads;
  s.round_workers = config.round_workers;
  s.engine = config.engine;
  s.agent_token = resolve_secret(config.agent_token_env);
  s.supervisor_token = resolve_secret(config.supervisor_token_env);
  return s;
}

void LatencyHistogram::record(double ms) {
  std::size_t i = 0;
  while (i < bounds_ms.size() && ms > bounds_ms[i]) ++i;
  ++counts[i];
  ++count;
  sum_ms += ms;
}

namespace {

using nlohmann::json;

struct Frame {
  std::uint64_t sequence = 0;
  std::string text;
};

struct SessionState {
  SessionState(std::string id_, Session s) : id(std::move(id_)), session(std::move(s)) {}

  const std::string id;
  Session session;  // strand only

  std::mutex strand_mu;
  std::deque<std::function<void()>> tasks;
  bool running = false;

  std::mutex ev_mu;
  std::condition_variable ev_cv;
  std::deque<Frame> events;
  std::uint64_t last_seq = 0;
  bool closed = false;
};

enum class Access { Agent, Supervisor };

struct HttpError {
  int status;
  std::string code;
  std::string message;
};

int status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Unauthenticated: return 401;
    case ErrorCode::UnknownSession:
    case ErrorCode::NotFound: return 404;
    case ErrorCode::UnknownSuggestion:
    case ErrorCode::NotGenerated:
    case ErrorCode::NotYetAnswered:
    case ErrorCode::EmptyConversation:
    case ErrorCode::BufferOverrun: return 409;
    case ErrorCode::RagUnavailable:
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::ProviderError:
    case ErrorCode::RateLimited:
    case ErrorCode::DeadlineExceeded:
    case ErrorCode::UnparseableOutput: return 503;
    case ErrorCode::StorageIo:
    case ErrorCode::CorruptSnapshot:
    case ErrorCode::VersionMismatch:
    case ErrorCode::StageAborted: return 500;
    default: return 400;
  }
}

bool same_token(std::string_view a, std::string_view b) {
  // Length leaks, contents do not.
  if (a.size() != b.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff |= static_cast<unsigned char>(a[i] ^ b[i]);
  return diff == 0;
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::MalformedDocument, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("request body is not JSON: ") + e.what());
  }
}

std::string required_string(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw Error(ErrorCode::SchemaViolation, std::string("'") + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const auto v = req.get_param_value(key);
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || v.size() > 18) {
    throw Error(ErrorCode::InvalidArgument, std::string("query parameter '") + key + "' must be a non-negative integer");
  }
  return static_cast<std::size_t>(std::stoull(v));
}

bool query_flag(const httplib::Request& req, const char* key, bool fallback) {
  if (!req.has_param(key)) return fallback;
  const auto v = req.get_param_value(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::InvalidArgument, std::string("query parameter '") + key + "' must be true or false");
}

json histogram_json(const LatencyHistogram& h) {
  return {{"bounds_ms", h.bounds_ms}, {"counts", h.counts}, {"count", h.count}, {"sum_ms", h.sum_ms}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct Service::Impl {
  Impl(Runtime rt, ServiceSettings s)
      : runtime(std::move(rt)), settings(std::move(s)), engine(runtime.engine_deps()) {}

  Runtime runtime;
  ServiceSettings settings;
  SuggestionEngine engine;

  httplib::Server server;
  std::unique_ptr<httplib::ThreadPool> workers;
  std::thread listener;
  std::atomic<bool> stopping{false};
  bool started = false;
  int bound_port = 0;
  std::promise<void> stopped_promise;
  std::shared_future<void> stopped = stopped_promise.get_future().share();

  mutable std::mutex sessions_mu;
  std::unordered_map<std::string, std::shared_ptr<SessionState>> sessions;
  std::mutex id_mu;
  std::mt19937_64 id_rng{std::random_device{}()};

  mutable std::mutex metrics_mu;
  LatencyHistogram match_hist, generate_hist, total_hist;
  std::atomic<std::uint64_t> sets_emitted{0}, events_emitted{0}, sessions_started{0};

  // ---- per-session strand ----

  void post(const std::shared_ptr<SessionState>& s, std::function<void()> fn) {
    {
      std::lock_guard lk(s->strand_mu);
      s->tasks.push_back(std::move(fn));
      if (s->running) return;
      s->running = true;
    }
    workers->enqueue([this, s] { drain(s); });
  }

  void drain(const std::shared_ptr<SessionState>& s) {
    for (;;) {
      std::function<void()> fn;
      {
        std::lock_guard lk(s->strand_mu);
        if (s->tasks.empty()) {
          s->running = false;
          return;
        }
        fn = std::move(s->tasks.front());
        s->tasks.pop_front();
      }
      fn();
    }
  }

  template <typename F>
  auto on_strand(const std::shared_ptr<SessionState>& s, F fn) -> decltype(fn()) {
    auto task = std::make_shared<std::packaged_task<decltype(fn())()>>(std::move(fn));
    auto fut = task->get_future();
    post(s, [task] { (*task)(); });
    return fut.get();
  }

  // ---- events ----

  std::uint64_t emit(SessionState& s, EventKind kind, json payload) {
    std::uint64_t seq;
    {
      std::lock_guard lk(s.ev_mu);
      seq = ++s.last_seq;
      const json body = {{"sequence", seq},
                         {"event_kind", to_string(kind)},
                         {"session_id", s.id},
                         {"payload", std::move(payload)}};
      std::string text = "id: " + std::to_string(seq) + "\nevent: " + std::string(to_string(kind)) +
                         "\ndata: " + body.dump() + "\n\n";
      s.events.push_back({seq, std::move(text)});
      while (s.events.size() > settings.event_buffer) s.events.pop_front();
    }
    events_emitted.fetch_add(1);
    s.ev_cv.notify_all();
    return seq;
  }

  std::uint64_t publish_set(SessionState& s, const SuggestionSet& set) {
    {
      std::lock_guard lk(metrics_mu);
      match_hist.record(to_ms(set.stage_latency.match));
      generate_hist.record(to_ms(set.stage_latency.generate));
      total_hist.record(to_ms(set.total_latency));
    }
    sets_emitted.fetch_add(1);
    const auto seq = emit(s, EventKind::SuggestionSet, json(set));
    if (set.degraded()) {
      emit(s, EventKind::DegradedNotice,
           {{"round", set.round}, {"match_degraded", set.match_degraded}, {"generate_degraded", set.generate_degraded}});
    }
    return seq;
  }

  // ---- sessions ----

  std::string new_session_id() {
    std::lock_guard lk(id_mu);
    char buf[24];
    std::snprintf(buf, sizeof buf, "s-%016llx", static_cast<unsigned long long>(id_rng()));
    return buf;
  }

  std::shared_ptr<SessionState> session(const std::string& id) const {
    std::lock_guard lk(sessions_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(ErrorCode::UnknownSession, "no session '" + id + "'");
    return it->second;
  }

  // ---- routing ----

  std::optional<HttpError> authorize(const httplib::Request& req, Access access) const {
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view kBearer = "Bearer ";
    if (header.rfind(kBearer, 0) != 0) return HttpError{401, "unauthenticated", "missing bearer token"};
    const std::string_view token = std::string_view(header).substr(kBearer.size());
    if (same_token(token, settings.supervisor_token)) return std::nullopt;
    if (same_token(token, settings.agent_token)) {
      if (access == Access::Agent) return std::nullopt;
      return HttpError{403, "forbidden", "supervisor token required"};
    }
    return HttpError{401, "unauthenticated", "unknown bearer token"};
  }

  using Body = std::function<void(const httplib::Request&, httplib::Response&)>;

  httplib::Server::Handler guarded(std::optional<Access> access, Body fn) {
    return [this, access, fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
      try {
        if (access) {
          if (auto denied = authorize(req, *access)) {
            send_json(res, denied->status, {{"error", denied->code}, {"message", denied->message}});
            return;
          }
        }
        fn(req, res);
      } catch (const Error& e) {
        send_json(res, status_for(e.code()), {{"error", to_string(e.code())}, {"message", e.what()}});
      } catch (const json::exception& e) {
        send_json(res, 400, {{"error", to_string(ErrorCode::SchemaViolation)}, {"message", e.what()}});
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", "internal"}, {"message", e.what()}});
      }
    };
  }

  void routes() {
    server.Post("/v1/sessions", guarded(Access::Agent, [this](const auto& req, auto& res) {
      const auto body = parse_body(req);
      EngineConfig cfg = settings.engine;
      if (auto it = body.find("trigger_interval"); it != body.end()) cfg.trigger_interval = it->template get<std::size_t>();
      cfg.validate();
      const auto id = new_session_id();
      auto state = std::make_shared<SessionState>(id, engine.new_session(id, cfg));
      {
        std::lock_guard lk(sessions_mu);
        sessions.emplace(id, state);
      }
      sessions_started.fetch_add(1);
      send_json(res, 201, {{"session_id", id}});
    }));

    server.Get(R"(/v1/sessions/([^/]+))", guarded(Access::Agent, [this](const auto& req, auto& res) {
      auto s = session(req.matches[1]);
      auto body = on_strand(s, [&] {
        const auto& sess = s->session;
        json j = {{"session_id", s->id},
                  {"turns", sess.conversation.turns.size()},
                  {"rounds_started", sess.rounds_started},
                  {"active_set", sess.active_set ? json(*sess.active_set) : json(nullptr)}};
        return j;
      });
      {
        std::lock_guard lk(s->ev_mu);
        body["last_sequence"] = s->last_seq;
      }
      send_json(res, 200, body);
    }));

    server.Delete(R"(/v1/sessions/([^/]+))", guarded(Access::Agent, [this](const auto& req, auto& res) {
      std::shared_ptr<SessionState> s;
      {
        std::lock_guard lk(sessions_mu);
        auto it = sessions.find(req.matches[1]);
        if (it == sessions.end()) throw Error(ErrorCode::UnknownSession, "no session '" + std::string(req.matches[1]) + "'");
        s = it->second;
        sessions.erase(it);
      }
      {
        std::lock_guard lk(s->ev_mu);
        s->closed = true;
      }
      s->ev_cv.notify_all();
      res.status = 204;
    }));

    server.Post(R"(/v1/sessions/([^/]+)/turns)", guarded(Access::Agent, [this](const auto& req, auto& res) {
      auto s = session(req.matches[1]);
      const auto body = parse_body(req);
      const Speaker speaker = parse_speaker(required_string(body, "speaker"));
      const std::string text = required_string(body, "text");
      std::optional<std::int64_t> ts;
      if (auto it = body.find("timestamp_ms"); it != body.end() && !it->is_null()) ts = it->template get<std::int64_t>();

      // The response is released as soon as the turn is stored; a due round
      // keeps running on the session's strand.
      auto done = std::make_shared<std::promise<json>>();
      auto fut = done->get_future();
      post(s, [this, s, done, speaker, text, ts] {
        std::optional<RoundInput> round;
        try {
          s->session.conversation = append_turn(s->session.conversation, speaker, text, ts);
          if (SuggestionEngine::should_trigger(s->session, TriggerMode::Auto)) round = engine.begin_round(s->session);
          done->set_value({{"index", s->session.conversation.last_index()}, {"triggered", round.has_value()}});
        } catch (...) {
          done->set_exception(std::current_exception());
          return;
        }
        if (!round) return;
        try {
          publish_set(*s, engine.install(s->session, engine.run_round(*round)));
        } catch (const std::exception& e) {
          std::fprintf(stderr, "faqpilot: round %llu of session %s failed: %s\n",
                       static_cast<unsigned long long>(round->round), s->id.c_str(), e.what());
        }
      });
      send_json(res, 200, fut.get());
    }));

    server.Post(R"(/v1/sessions/([^/]+)/trigger)", guarded(Access::Agent, [this](const auto& req, auto& res) {
      auto s = session(req.matches[1]);
      auto body = on_strand(s, [&] {
        const auto set = engine.suggest(s->session, TriggerMode::Manual);
        const auto seq = publish_set(*s, set);
        json j = set;
        j["sequence"] = seq;
        return j;
      });
      send_json(res, 200, body);
    }));

    server.Post(R"(/v1/sessions/([^/]+)/select)", guarded(Access::Agent, [this](const auto& req, auto& res) {
      auto s = session(req.matches[1]);
      const auto id = required_string(parse_body(req), "suggestion_id");
      auto body = on_strand(s, [&] {
        const auto answer = engine.select(s->session, id);
        json payload = {{"suggestion_id", id}, {"answer", answer}};
        payload["sequence"] = emit(*s, EventKind::Answer, payload);
        return payload;
      });
      send_json(res, 200, body);
    }));

    server.Post(R"(/v1/sessions/([^/]+)/tag-faq)", guarded(Access::Agent, [this](const auto& req, auto& res) {
      auto s = session(req.matches[1]);
      const auto body = parse_body(req);
      const auto id = required_string(body, "suggestion_id");
      std::optional<std::string> answer;
      if (auto it = body.find("answer"); it != body.end() && !it->is_null()) answer = it->template get<std::string>();
      auto out = on_strand(s, [&] {
        const auto tag = engine.tag_as_faq(s->session, id, answer);
        json payload = {{"suggestion_id", id}, {"qid", tag.qid}, {"merged", tag.merged}};
        payload["sequence"] = emit(*s, EventKind::FaqTagged, payload);
        return payload;
      });
      send_json(res, 200, out);
    }));

    server.Get(R"(/v1/sessions/([^/]+)/events)", guarded(Access::Agent, [this](const auto& req, auto& res) {
      stream_events(req, res);
    }));

    faq_routes();

    server.Get("/v1/metrics", guarded(std::nullopt, [this](const auto&, auto& res) {
      send_json(res, 200, metrics_json());
    }));
    server.Get("/v1/health", guarded(std::nullopt, [this](const auto&, auto& res) {
      std::size_t n;
      {
        std::lock_guard lk(sessions_mu);
        n = sessions.size();
      }
      send_json(res, 200, {{"status", "ok"}, {"faqs", runtime.store->size()}, {"sessions", n}});
    }));
  }

  void stream_events(const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    std::optional<std::uint64_t> after;
    if (req.has_param("last_seq")) after = query_size(req, "last_seq", 0);
    else if (req.has_header("Last-Event-ID")) {
      const auto v = req.get_header_value("Last-Event-ID");
      if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || v.size() > 18) {
        throw Error(ErrorCode::InvalidArgument, "Last-Event-ID must be a sequence number");
      }
      after = std::stoull(v);
    }
    const bool follow = query_flag(req, "follow", true);

    std::uint64_t cursor;
    {
      std::lock_guard lk(s->ev_mu);
      if (!after) {
        cursor = s->last_seq;
      } else {
        if (*after > s->last_seq) throw Error(ErrorCode::InvalidArgument, "last_seq is ahead of the session");
        const std::uint64_t oldest = s->events.empty() ? s->last_seq + 1 : s->events.front().sequence;
        if (*after + 1 < oldest) {
          throw Error(ErrorCode::BufferOverrun, std::to_string(oldest - *after - 1) +
                                                    " missed events are no longer buffered; resync the session");
        }
        cursor = *after;
      }
    }

    auto pos = std::make_shared<std::uint64_t>(cursor);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, s, pos, follow](std::size_t, httplib::DataSink& sink) {
          std::string out;
          bool finish = false;
          {
            std::unique_lock lk(s->ev_mu);
            if (follow) {
              s->ev_cv.wait_for(lk, std::chrono::milliseconds(200), [&] {
                return s->last_seq > *pos || s->closed || stopping.load();
              });
            }
            const std::uint64_t oldest = s->events.empty() ? s->last_seq + 1 : s->events.front().sequence;
            if (*pos + 1 < oldest) {
              out = "event: error\ndata: {\"error\":\"buffer-overrun\"}\n\n";
              finish = true;
            } else {
              for (const auto& f : s->events) {
                if (f.sequence > *pos) {
                  out += f.text;
                  *pos = f.sequence;
                }
              }
            }
            if (!follow || s->closed || stopping.load()) finish = true;
          }
          if (!out.empty() && !sink.write(out.data(), out.size())) return false;
          if (finish) {
            sink.done();
          } else if (out.empty() && !sink.is_writable()) {
            return false;
          }
          return true;
        });
  }

  void faq_routes() {
    server.Get("/v1/faqs", guarded(Access::Supervisor, [this](const auto& req, auto& res) {
      const auto offset = query_size(req, "offset", 0);
      const auto limit = query_size(req, "limit", 50);
      const auto page = runtime.store->list(offset, limit, query_flag(req, "answerless", false));
      send_json(res, 200, {{"items", page.entries}, {"total", page.total}, {"offset", offset}, {"limit", limit}});
    }));

    server.Post("/v1/faqs", guarded(Access::Supervisor, [this](const auto& req, auto& res) {
      const auto body = parse_body(req);
      FaqUpsert f;
      f.question = required_string(body, "question");
      if (text::is_blank(*f.question)) throw Error(ErrorCode::EmptyText, "question is empty");
      if (auto it = body.find("answer"); it != body.end() && !it->is_null()) f.answer = it->template get<std::string>();
      if (auto it = body.find("frequency"); it != body.end()) f.frequency = it->template get<std::uint64_t>();
      f.source = FaqSource::Supervisor;
      const auto qid = runtime.store->upsert(f);
      send_json(res, 201, json(runtime.store->get(qid)));
    }));

    server.Get(R"(/v1/faqs/([^/]+))", guarded(Access::Supervisor, [this](const auto& req, auto& res) {
      send_json(res, 200, json(runtime.store->get(req.matches[1])));
    }));

    server.Put(R"(/v1/faqs/([^/]+))", guarded(Access::Supervisor, [this](const auto& req, auto& res) {
      const std::string qid = req.matches[1];
      (void)runtime.store->get(qid);
      const auto body = parse_body(req);
      FaqUpsert f;
      f.qid = qid;
      if (auto it = body.find("question"); it != body.end()) f.question = it->template get<std::string>();
      if (auto it = body.find("answer"); it != body.end()) {
        if (it->is_null()) f.clear_answer = true;
        else f.answer = it->template get<std::string>();
      }
      if (auto it = body.find("frequency"); it != body.end()) f.frequency = it->template get<std::uint64_t>();
      runtime.store->upsert(f);
      send_json(res, 200, json(runtime.store->get(qid)));
    }));

    server.Delete(R"(/v1/faqs/([^/]+))", guarded(Access::Supervisor, [this](const auto& req, auto& res) {
      const std::string qid = req.matches[1];
      if (!runtime.store->remove(qid)) throw Error(ErrorCode::NotFound, "no FAQ '" + qid + "'");
      res.status = 204;
    }));
  }

  ServiceMetrics snapshot() const {
    ServiceMetrics m;
    m.sets_emitted = sets_emitted.load();
    m.events_emitted = events_emitted.load();
    m.sessions_started = sessions_started.load();
    {
      std::lock_guard lk(sessions_mu);
      m.sessions_active = sessions.size();
    }
    m.ledger = engine.ledger();
    m.rag = runtime.rag->counters();
    std::lock_guard lk(metrics_mu);
    m.match_latency = match_hist;
    m.generate_latency = generate_hist;
    m.total_latency = total_hist;
    return m;
  }

  json metrics_json() const {
    const auto m = snapshot();
    return {{"sets_emitted", m.sets_emitted},
            {"events_emitted", m.events_emitted},
            {"sessions_started", m.sessions_started},
            {"sessions_active", m.sessions_active},
            {"ledger", m.ledger},
            {"selections",
             {{"faq", m.ledger.faq_selections},
              {"answerless_matched", m.ledger.answerless_matched_selections},
              {"generated", m.ledger.generated_selections}}},
            {"rag", m.rag},
            {"latency_ms",
             {{"match", histogram_json(m.match_latency)},
              {"generate", histogram_json(m.generate_latency)},
              {"total", histogram_json(m.total_latency)}}}};
  }
};

Service::Service(Runtime runtime, ServiceSettings settings) {
  settings.validate();
  impl_ = std::make_unique<Impl>(std::move(runtime), std::move(settings));
  const auto threads = impl_->settings.http_threads;
  impl_->server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  impl_->server.set_keep_alive_max_count(1000);
  impl_->workers = std::make_unique<httplib::ThreadPool>(impl_->settings.round_workers);
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::start() {
  auto& d = *impl_;
  if (d.started) return d.bound_port;
  if (d.settings.port == 0) {
    d.bound_port = d.server.bind_to_any_port(d.settings.host);
  } else {
    d.bound_port = d.server.bind_to_port(d.settings.host, d.settings.port) ? d.settings.port : -1;
  }
  if (d.bound_port <= 0) {
    throw Error(ErrorCode::InvalidConfig,
                "cannot listen on " + d.settings.host + ":" + std::to_string(d.settings.port));
  }
  d.listener = std::thread([&d] { d.server.listen_after_bind(); });
  d.server.wait_until_ready();
  d.started = true;
  return d.bound_port;
}

void Service::wait() { impl_->stopped.wait(); }

void Service::stop() {
  if (!impl_) return;
  auto& d = *impl_;
  if (d.stopping.exchange(true)) return;
  {
    std::lock_guard lk(d.sessions_mu);
    for (auto& [_, s] : d.sessions) s->ev_cv.notify_all();
  }
  d.server.stop();
  if (d.listener.joinable()) d.listener.join();
  d.workers->shutdown();
  d.stopped_promise.set_value();
}

int Service::port() const noexcept { return impl_->bound_port; }

ServiceMetrics Service::metrics() const { return impl_->snapshot(); }

}  // namespace faqpilot
