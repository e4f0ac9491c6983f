#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <thread>

#include <nlohmann/json.hpp>

#include "faqpilot/error.hpp"
#include "faqpilot/service.hpp"

using namespace faqpilot;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

constexpr const char* kAgent = "agent-token-1";
constexpr const char* kSupervisor = "supervisor-token-1";

struct Event {
  std::uint64_t id = 0;
  std::string kind;
  json data;
};

std::vector<Event> parse_frames(const std::string& stream) {
  std::vector<Event> out;
  std::size_t start = 0;
  for (;;) {
    const auto end = stream.find("\n\n", start);
    if (end == std::string::npos) break;
    Event e;
    std::size_t line_start = start;
    while (line_start < end) {
      auto nl = stream.find('\n', line_start);
      if (nl == std::string::npos || nl > end) nl = end;
      const auto line = stream.substr(line_start, nl - line_start);
      if (line.rfind("id: ", 0) == 0) e.id = std::stoull(line.substr(4));
      else if (line.rfind("event: ", 0) == 0) e.kind = line.substr(7);
      else if (line.rfind("data: ", 0) == 0) e.data = json::parse(line.substr(6));
      line_start = nl + 1;
    }
    out.push_back(std::move(e));
    start = end + 2;
  }
  return out;
}

struct Harness {
  std::unique_ptr<Service> service;
  std::shared_ptr<FaqStore> store;
  int port = 0;

  explicit Harness(std::size_t event_buffer = 64) {
    AppConfig cfg;
    auto rt = build_runtime(cfg, true);
    store = rt.store;
    ServiceSettings s;
    s.agent_token = kAgent;
    s.supervisor_token = kSupervisor;
    s.event_buffer = event_buffer;
    s.http_threads = 96;
    service = std::make_unique<Service>(std::move(rt), s);
    port = service->start();
  }

  std::string faq(const std::string& q, std::optional<std::string> a) {
    FaqUpsert f;
    f.question = q;
    f.answer = std::move(a);
    return store->upsert(f);
  }

  httplib::Client client(const char* token = kAgent) const {
    httplib::Client c("127.0.0.1", port);
    if (token) c.set_bearer_token_auth(token);
    c.set_read_timeout(10, 0);
    return c;
  }

  static json body(const httplib::Result& r) {
    EXPECT_TRUE(r) << "request failed";
    return r && !r->body.empty() ? json::parse(r->body) : json();
  }

  std::string start_session(std::size_t interval = 4) const {
    auto c = client();
    auto r = c.Post("/v1/sessions", json{{"trigger_interval", interval}}.dump(), "application/json");
    if (!r) {
      ADD_FAILURE() << "start_session: " << httplib::to_string(r.error());
      return {};
    }
    EXPECT_EQ(r->status, 201);
    return body(r)["session_id"];
  }

  json turn(const std::string& sid, const std::string& speaker, const std::string& text, int expect = 200) const {
    auto c = client();
    auto r = c.Post("/v1/sessions/" + sid + "/turns", json{{"speaker", speaker}, {"text", text}}.dump(),
                    "application/json");
    if (!r) {
      ADD_FAILURE() << "turn: " << httplib::to_string(r.error());
      return {};
    }
    EXPECT_EQ(r->status, expect) << r->body;
    return body(r);
  }

  json post(const std::string& path, const json& b, int expect = 200, const char* token = kAgent) const {
    auto c = client(token);
    auto r = c.Post(path, b.dump(), "application/json");
    if (!r) {
      ADD_FAILURE() << path << ": " << httplib::to_string(r.error());
      return {};
    }
    EXPECT_EQ(r->status, expect) << path << " " << r->body;
    return body(r);
  }

  std::vector<Event> events(const std::string& sid, std::uint64_t last_seq = 0, int* status = nullptr) const {
    auto c = client();
    auto r = c.Get("/v1/sessions/" + sid + "/events?follow=false&last_seq=" + std::to_string(last_seq));
    if (!r) {
      ADD_FAILURE() << "events: " << httplib::to_string(r.error());
      return {};
    }
    if (status) *status = r->status;
    return r->status == 200 ? parse_frames(r->body) : std::vector<Event>{};
  }

  // Polls until `n` suggestion_set events are buffered.
  std::vector<Event> await_sets(const std::string& sid, std::size_t n, std::chrono::milliseconds budget = 5000ms) const {
    const auto until = std::chrono::steady_clock::now() + budget;
    for (;;) {
      auto ev = events(sid);
      const auto sets = std::count_if(ev.begin(), ev.end(), [](const Event& e) { return e.kind == "suggestion_set"; });
      if (static_cast<std::size_t>(sets) >= n || std::chrono::steady_clock::now() > until) return ev;
      std::this_thread::sleep_for(10ms);
    }
  }

  json metrics() const {
    auto c = client(nullptr);
    return body(c.Get("/v1/metrics"));
  }
};

}  // namespace

TEST(Service, AuthRoles) {
  Harness h;
  auto anon = h.client(nullptr);
  EXPECT_EQ(anon.Post("/v1/sessions", "{}", "application/json")->status, 401);
  auto wrong = h.client("nope");
  EXPECT_EQ(wrong.Post("/v1/sessions", "{}", "application/json")->status, 401);
  EXPECT_EQ(h.client(kAgent).Get("/v1/faqs")->status, 403);
  EXPECT_EQ(h.client(kSupervisor).Get("/v1/faqs")->status, 200);
  EXPECT_EQ(h.client(kSupervisor).Post("/v1/sessions", "{}", "application/json")->status, 201);
  EXPECT_EQ(anon.Get("/v1/metrics")->status, 200);
  EXPECT_EQ(anon.Get("/v1/health")->status, 200);
}

TEST(Service, SettingsValidation) {
  ServiceSettings s;
  s.agent_token = "same";
  s.supervisor_token = "same";
  EXPECT_THROW(s.validate(), Error);
  s.supervisor_token = "other";
  EXPECT_NO_THROW(s.validate());
  s.event_buffer = 0;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Service, SessionLifecycle) {
  Harness h;
  const auto a = h.start_session();
  const auto b = h.start_session();
  EXPECT_NE(a, b);
  auto c = h.client();
  auto got = Harness::body(c.Get("/v1/sessions/" + a));
  EXPECT_EQ(got["session_id"], a);
  EXPECT_EQ(got["turns"], 0);
  EXPECT_TRUE(got["active_set"].is_null());

  EXPECT_EQ(c.Delete("/v1/sessions/" + a)->status, 204);
  auto gone = c.Get("/v1/sessions/" + a);
  EXPECT_EQ(gone->status, 404);
  EXPECT_EQ(json::parse(gone->body)["error"], "unknown-session");
  h.turn(a, "customer", "hello", 404);
}

TEST(Service, TurnValidationAndAutoTrigger) {
  Harness h;
  const auto sid = h.start_session(4);
  EXPECT_EQ(h.turn(sid, "customer", "   ", 400)["error"], "empty-text");
  h.turn(sid, "robot", "hi", 400);
  h.post("/v1/sessions/" + sid + "/turns", json{{"speaker", "agent"}}, 400);
  auto c = h.client();
  EXPECT_EQ(c.Post("/v1/sessions/" + sid + "/turns", "{not json", "application/json")->status, 400);

  EXPECT_FALSE(h.turn(sid, "customer", "Hi there")["triggered"]);
  EXPECT_FALSE(h.turn(sid, "agent", "Hello, how can I help?")["triggered"]);
  EXPECT_TRUE(h.events(sid).empty());
  EXPECT_FALSE(h.turn(sid, "customer", "How do I reset my router?")["triggered"]);
  const auto fourth = h.turn(sid, "agent", "Let me check.");
  EXPECT_TRUE(fourth["triggered"]);
  EXPECT_EQ(fourth["index"], 3);
  auto ev = h.await_sets(sid, 1);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, "suggestion_set");
  EXPECT_EQ(ev[0].id, 1u);
  EXPECT_EQ(ev[0].data["sequence"], 1);
  EXPECT_EQ(ev[0].data["event_kind"], "suggestion_set");
  EXPECT_EQ(ev[0].data["session_id"], sid);
  EXPECT_EQ(ev[0].data["payload"]["trigger_turn_index"], 3);
}

TEST(Service, ManualTriggerAndEventReplay) {
  Harness h;
  const auto sid = h.start_session(100);
  EXPECT_EQ(h.post("/v1/sessions/" + sid + "/trigger", json::object(), 409)["error"], "empty-conversation");
  h.turn(sid, "customer", "Why is my bill so high?");
  const auto first = h.post("/v1/sessions/" + sid + "/trigger", json::object());
  const auto second = h.post("/v1/sessions/" + sid + "/trigger", json::object());
  EXPECT_LT(first["sequence"].get<int>(), second["sequence"].get<int>());
  EXPECT_LE(first["suggestions"].size(), 6u);

  auto all = h.events(sid, 0);
  ASSERT_EQ(all.size(), 2u);
  auto missed = h.events(sid, 1);
  ASSERT_EQ(missed.size(), 1u);
  EXPECT_EQ(missed[0].id, 2u);
  EXPECT_TRUE(h.events(sid, 2).empty());
  int status = 0;
  (void)h.events(sid, 3, &status);
  EXPECT_EQ(status, 400);

  // Last-Event-ID works like last_seq.
  auto c = h.client();
  auto r = c.Get("/v1/sessions/" + sid + "/events?follow=false", {{"Last-Event-ID", "1"}});
  EXPECT_EQ(parse_frames(r->body).size(), 1u);
}

TEST(Service, BufferOverrun) {
  Harness h(64);
  const auto sid = h.start_session(1000);
  h.turn(sid, "customer", "Can I upgrade my plan online?");
  for (int i = 0; i < 65; ++i) h.post("/v1/sessions/" + sid + "/trigger", json::object());
  int status = 0;
  (void)h.events(sid, 0, &status);
  EXPECT_EQ(status, 409);
  auto c = h.client();
  auto r = c.Get("/v1/sessions/" + sid + "/events?follow=false&last_seq=0");
  EXPECT_EQ(json::parse(r->body)["error"], "buffer-overrun");
  const auto replay = h.events(sid, 1, &status);
  EXPECT_EQ(status, 200);
  ASSERT_EQ(replay.size(), 64u);
  EXPECT_EQ(replay.front().id, 2u);
  EXPECT_EQ(replay.back().id, 65u);
}

TEST(Service, LiveStreamDeliversWithinDeadline) {
  Harness h;
  const auto sid = h.start_session(4);
  for (int i = 0; i < 3; ++i) h.turn(sid, i % 2 ? "agent" : "customer", "How do I reset my router?");

  std::atomic<bool> got{false};
  std::chrono::steady_clock::time_point received;
  std::thread listener([&] {
    auto c = h.client();
    std::string buf;
    c.Get("/v1/sessions/" + sid + "/events?last_seq=0", [&](const char* data, std::size_t len) {
      buf.append(data, len);
      if (buf.find("event: suggestion_set") != std::string::npos) {
        received = std::chrono::steady_clock::now();
        got = true;
        return false;
      }
      return true;
    });
  });
  std::this_thread::sleep_for(100ms);
  const auto sent = std::chrono::steady_clock::now();
  h.turn(sid, "agent", "One moment.");
  listener.join();
  ASSERT_TRUE(got);
  EXPECT_LT(received - sent, EngineConfig{}.deadline + 200ms);
}

TEST(Service, SelectRoutesAndMetricsReconcile) {
  Harness h;
  auto m0 = h.metrics();
  EXPECT_EQ(m0["sets_emitted"], 0);
  EXPECT_EQ(m0["rag"]["calls_made"], 0);
  EXPECT_EQ(m0["selections"]["faq"], 0);

  h.faq("How do I reset my router?", "Hold the reset button for ten seconds.");
  const auto sid = h.start_session(100);
  h.turn(sid, "customer", "How do I reset my router? Also can I get a paper invoice?");
  const auto set = h.post("/v1/sessions/" + sid + "/trigger", json::object());
  std::string matched, generated;
  for (const auto& s : set["suggestions"]) {
    if (s["source"] == "matched" && matched.empty()) matched = s["id"];
    if (s["source"] == "generated" && generated.empty()) generated = s["id"];
  }
  ASSERT_FALSE(matched.empty());
  ASSERT_FALSE(generated.empty());

  const auto a = h.post("/v1/sessions/" + sid + "/select", json{{"suggestion_id", matched}});
  EXPECT_EQ(a["answer"]["source"], "faq");
  auto m1 = h.metrics();
  EXPECT_EQ(m1["selections"]["faq"], 1);
  EXPECT_EQ(m1["rag"]["calls_made"], 0);
  EXPECT_EQ(m1["rag"]["calls_bypassed"], 1);

  EXPECT_EQ(h.post("/v1/sessions/" + sid + "/tag-faq", json{{"suggestion_id", generated}}, 409)["error"],
            "not-yet-answered");
  const auto g = h.post("/v1/sessions/" + sid + "/select", json{{"suggestion_id", generated}});
  EXPECT_EQ(g["answer"]["source"], "rag");
  auto m2 = h.metrics();
  EXPECT_EQ(m2["selections"]["generated"], 1);
  EXPECT_EQ(m2["rag"]["calls_made"], 1);

  EXPECT_EQ(h.post("/v1/sessions/" + sid + "/tag-faq", json{{"suggestion_id", matched}}, 409)["error"],
            "not-generated");
  const auto tagged = h.post("/v1/sessions/" + sid + "/tag-faq", json{{"suggestion_id", generated}});
  EXPECT_FALSE(tagged["qid"].get<std::string>().empty());
  EXPECT_TRUE(h.store->find(tagged["qid"]).has_value());

  auto ev = h.events(sid);
  std::vector<std::string> kinds;
  for (const auto& e : ev) kinds.push_back(e.kind);
  EXPECT_EQ(kinds, (std::vector<std::string>{"suggestion_set", "answer", "answer", "faq_tagged"}));
  EXPECT_EQ(ev[1].data["payload"]["answer"]["source"], "faq");

  // A new set supersedes the old ids.
  h.post("/v1/sessions/" + sid + "/trigger", json::object());
  EXPECT_EQ(h.post("/v1/sessions/" + sid + "/select", json{{"suggestion_id", matched}}, 409)["error"],
            "unknown-suggestion");

  const auto m3 = h.metrics();
  EXPECT_EQ(m3["sets_emitted"], 2);
  EXPECT_EQ(m3["ledger"]["sets_produced"], 2);
  EXPECT_EQ(m3["ledger"]["tags"], 1);
  EXPECT_EQ(m3["latency_ms"]["total"]["count"], 2);
}

TEST(Service, FaqCrud) {
  Harness h;
  auto sup = h.client(kSupervisor);
  auto created = Harness::body(
      sup.Post("/v1/faqs", json{{"question", "How do I pay my bill?"}, {"answer", "Online."}}.dump(), "application/json"));
  const std::string qid = created["qid"];
  EXPECT_EQ(created["source"], "supervisor");
  auto open = Harness::body(sup.Post("/v1/faqs", json{{"question", "Where is my order?"}}.dump(), "application/json"));
  EXPECT_TRUE(open["answer"].is_null());
  EXPECT_EQ(sup.Post("/v1/faqs", json{{"question", " "}}.dump(), "application/json")->status, 400);
  EXPECT_EQ(sup.Post("/v1/faqs", json{{"answer", "x"}}.dump(), "application/json")->status, 400);

  auto list = Harness::body(sup.Get("/v1/faqs"));
  EXPECT_EQ(list["total"], 2);
  auto answerless = Harness::body(sup.Get("/v1/faqs?answerless=true"));
  ASSERT_EQ(answerless["items"].size(), 1u);
  EXPECT_EQ(answerless["items"][0]["qid"], open["qid"]);
  auto page = Harness::body(sup.Get("/v1/faqs?offset=1&limit=1"));
  EXPECT_EQ(page["items"].size(), 1u);
  EXPECT_EQ(sup.Get("/v1/faqs?limit=abc")->status, 400);

  auto updated = Harness::body(sup.Put("/v1/faqs/" + qid, json{{"answer", nullptr}}.dump(), "application/json"));
  EXPECT_TRUE(updated["answer"].is_null());
  EXPECT_EQ(updated["question"], "How do I pay my bill?");
  EXPECT_EQ(sup.Put("/v1/faqs/missing", "{}", "application/json")->status, 404);

  EXPECT_EQ(sup.Delete("/v1/faqs/" + qid)->status, 204);
  EXPECT_EQ(sup.Get("/v1/faqs/" + qid)->status, 404);
  EXPECT_EQ(sup.Delete("/v1/faqs/" + qid)->status, 404);
}

TEST(Service, FiftyConcurrentSessions) {
  Harness h;
  h.faq("How do I reset my router?", "Hold reset.");
  h.faq("What is the late payment fee?", std::nullopt);
  constexpr int kSessions = 50;
  constexpr int kTurns = 12;  // interval 4 → three rounds each
  std::vector<std::string> ids(kSessions);
  std::vector<std::thread> threads;
  for (int i = 0; i < kSessions; ++i) {
    threads.emplace_back([&, i] {
      ids[i] = h.start_session(4);
      for (int t = 0; t < kTurns; ++t) {
        h.turn(ids[i], t % 2 ? "agent" : "customer",
               t % 4 == 0 ? "How do I reset my router?" : "What is the late payment fee for session " + std::to_string(i) + "?");
      }
    });
  }
  for (auto& t : threads) t.join();

  std::size_t total_sets = 0;
  for (const auto& sid : ids) {
    auto ev = h.await_sets(sid, 3);
    std::size_t sets = 0;
    for (std::size_t k = 0; k < ev.size(); ++k) {
      EXPECT_EQ(ev[k].id, k + 1) << sid;
      EXPECT_EQ(ev[k].data["session_id"], sid);
      if (ev[k].kind == "suggestion_set") ++sets;
    }
    EXPECT_EQ(sets, 3u) << sid;
    total_sets += sets;
  }
  const auto m = h.metrics();
  EXPECT_EQ(total_sets, 150u);
  EXPECT_EQ(m["sets_emitted"], total_sets);
  EXPECT_EQ(m["ledger"]["sets_produced"], total_sets);
  EXPECT_EQ(m["sessions_started"], kSessions);
  const auto sm = h.service->metrics();
  EXPECT_EQ(sm.total_latency.count, total_sets);
}
