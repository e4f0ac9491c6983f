#include "faqpilot/rag_client.hpp"

#include <nlohmann/json.hpp>

#include "faqpilot/error.hpp"
#include "faqpilot/text.hpp"
#include "http_client.hpp"

namespace faqpilot {

ScriptedRagBackend::ScriptedRagBackend(ScriptedRagBehavior behavior, std::shared_ptr<const Clock> clock)
    : behavior_(std::move(behavior)), clock_(std::move(clock)) {}

RagAnswer ScriptedRagBackend::answer(const RagRequest& req) {
  if (behavior_.failure_mode == FailureMode::Timeout || behavior_.injected_latency > req.deadline) {
    clock_->sleep_for(req.deadline);
    throw Error(ErrorCode::DeadlineExceeded, "scripted RAG backend exceeded the deadline");
  }
  clock_->sleep_for(behavior_.injected_latency);
  if (behavior_.failure_mode) throw Error(ErrorCode::RagUnavailable, "scripted RAG backend failure");

  for (const auto& rule : behavior_.rules) {
    if (text::contains_icase(req.question, rule.pattern)) return RagAnswer{rule.answer, rule.source_refs, {}};
  }
  if (!behavior_.default_answer) throw Error(ErrorCode::RagUnavailable, "no scripted answer for question");
  std::string out = *behavior_.default_answer;
  if (auto pos = out.find("{{question}}"); pos != std::string::npos) out.replace(pos, 12, req.question);
  return RagAnswer{out, {}, {}};
}

RemoteRagBackend::RemoteRagBackend(std::string endpoint, std::string credential, std::shared_ptr<const Clock> clock)
    : endpoint_(std::move(endpoint)), credential_(std::move(credential)), clock_(std::move(clock)) {
  if (endpoint_.empty()) throw Error(ErrorCode::InvalidConfig, "remote RAG backend needs an endpoint");
}

RagAnswer RemoteRagBackend::answer(const RagRequest& req) {
  nlohmann::json body = {{"question", req.question}};
  if (req.context_hint) body["context_hint"] = *req.context_hint;
  const auto result = detail::post_json_with_retry(detail::parse_endpoint(endpoint_), body.dump(), credential_,
                                                   req.deadline, {}, *clock_);
  if (result.outcome == detail::PostOutcome::DeadlineExceeded) {
    throw Error(ErrorCode::DeadlineExceeded, "RAG request timed out");
  }
  if (result.outcome != detail::PostOutcome::Ok) {
    throw Error(ErrorCode::RagUnavailable, "RAG backend returned status " + std::to_string(result.response.status));
  }
  try {
    const auto j = nlohmann::json::parse(result.response.body);
    RagAnswer a;
    a.text = j.at("answer").get<std::string>();
    if (j.contains("source_refs")) a.source_refs = j.at("source_refs").get<std::vector<std::string>>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::RagUnavailable, std::string("bad RAG payload: ") + e.what());
  }
}

RagClient::RagClient(std::shared_ptr<RagBackend> backend, std::shared_ptr<const Clock> clock)
    : backend_(std::move(backend)), clock_(std::move(clock)) {
  if (!backend_) throw Error(ErrorCode::InvalidConfig, "RAG client needs a backend");
}

RagAnswer RagClient::retrieve(const RagRequest& req) {
  if (text::is_blank(req.question)) throw Error(ErrorCode::EmptyText, "RAG question is empty");
  made_.fetch_add(1);
  const Instant start = clock_->now();
  RagAnswer a = backend_->answer(req);
  a.latency = clock_->now() - start;
  if (a.latency > req.deadline) throw Error(ErrorCode::DeadlineExceeded, "RAG answer arrived after the deadline");
  if (text::is_blank(a.text)) throw Error(ErrorCode::RagUnavailable, "RAG backend returned an empty answer");
  return a;
}

}  // namespace faqpilot
