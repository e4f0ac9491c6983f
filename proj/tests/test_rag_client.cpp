#include <gtest/gtest.h>

#include <chrono>

#include <nlohmann/json.hpp>

#include "faqpilot/error.hpp"
#include "faqpilot/rag_client.hpp"
#include "support/stub_server.hpp"

using namespace faqpilot;
using namespace std::chrono_literals;

TEST(Rag, ScriptedRuleAnswers) {
  ScriptedRagBehavior b;
  b.rules.push_back({"reset router", "Hold the button 10 s", {"kb-1"}});
  RagClient rag(std::make_shared<ScriptedRagBackend>(b));
  auto a = rag.retrieve({"How do I reset router settings?", std::nullopt, 2s});
  EXPECT_EQ(a.text, "Hold the button 10 s");
  EXPECT_EQ(a.source_refs, std::vector<std::string>{"kb-1"});
  EXPECT_EQ(rag.retrieve({"Other?", std::nullopt, 2s}).text, "Knowledge-base answer: Other?");
}

TEST(Rag, DeadlineStillCountsTheCall) {
  ScriptedRagBehavior b;
  b.injected_latency = 3s;
  RagClient rag(std::make_shared<ScriptedRagBackend>(b));
  auto t0 = std::chrono::steady_clock::now();
  try {
    (void)rag.retrieve({"q", std::nullopt, 200ms});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DeadlineExceeded);
  }
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 300ms);
  EXPECT_EQ(rag.counters().calls_made, 1u);
}

TEST(Rag, CountersAreIndependentAndMonotone) {
  RagClient rag(std::make_shared<ScriptedRagBackend>(ScriptedRagBehavior{}));
  EXPECT_EQ(rag.counters().calls_bypassed, 0u);
  rag.record_bypass();
  EXPECT_EQ(rag.counters().calls_bypassed, 1u);
  EXPECT_EQ(rag.counters().calls_made, 0u);
  (void)rag.retrieve({"a", std::nullopt, 1s});
  (void)rag.retrieve({"b", std::nullopt, 1s});
  EXPECT_EQ(rag.counters().calls_made, 2u);
  for (int i = 0; i < 9; ++i) rag.record_bypass();
  EXPECT_EQ(rag.counters().calls_bypassed, 10u);
}

TEST(Rag, UnmatchedWithoutDefaultIsUnavailable) {
  ScriptedRagBehavior b;
  b.default_answer = std::nullopt;
  RagClient rag(std::make_shared<ScriptedRagBackend>(b));
  try {
    (void)rag.retrieve({"q", std::nullopt, 1s});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RagUnavailable);
  }
}

TEST(Rag, RemoteBackendRoundTrip) {
  faqpilot::testing::StubServer stub;
  stub.server().Post("/answer", [](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    nlohmann::json out{{"answer", "A: " + body["question"].get<std::string>()},
                       {"source_refs", {"kb-9"}},
                       {"hint", body.value("context_hint", "")}};
    res.set_content(out.dump(), "application/json");
  });
  stub.server().Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  stub.start();
  RagClient rag(std::make_shared<RemoteRagBackend>(stub.url("/answer"), "tok"));
  auto a = rag.retrieve({"why?", std::string("Customer: hi"), 2s});
  EXPECT_EQ(a.text, "A: why?");
  EXPECT_EQ(a.source_refs, std::vector<std::string>{"kb-9"});

  RagClient down(std::make_shared<RemoteRagBackend>(stub.url("/down"), ""));
  EXPECT_THROW((void)down.retrieve({"q", std::nullopt, 1s}), Error);
  EXPECT_EQ(down.counters().calls_made, 1u);
}
