#include "faqpilot/embedding.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "faqpilot/error.hpp"
#include "faqpilot/text.hpp"
#include "http_client.hpp"

namespace faqpilot {

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void normalize(Vector& v) {
  const double n = l2_norm(v);
  if (n == 0.0) return;
  for (double& x : v) x /= n;
}

double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  const double c = ab / (std::sqrt(aa) * std::sqrt(bb));
  return std::clamp(c, -1.0, 1.0);
}

std::vector<Vector> Embedder::embed_batch(const std::vector<std::string>& texts) const {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

DeterministicEmbedder::DeterministicEmbedder(std::size_t dim, std::uint64_t seed)
    : dim_(dim), basis_(0xcbf29ce484222325ULL ^ (seed * 0x9E3779B97F4A7C15ULL)) {
  if (dim < 8) throw Error(ErrorCode::InvalidConfig, "embedding dim must be >= 8");
}

Vector DeterministicEmbedder::embed(std::string_view input) const {
  const auto trimmed = text::trim(input);
  if (trimmed.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");

  const std::string padded = " " + text::to_lower(trimmed) + " ";
  Vector v(dim_, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const std::uint64_t h = text::fnv1a64(std::string_view(padded).substr(i, 3), basis_);
    const std::size_t bucket = static_cast<std::size_t>((h >> 1) % dim_);
    v[bucket] += (h & 1U) ? 1.0 : -1.0;
  }
  normalize(v);
  return v;
}

RemoteEmbedder::RemoteEmbedder(EmbedderSpec spec, std::shared_ptr<const Clock> clock)
    : spec_(std::move(spec)), clock_(std::move(clock)) {
  if (spec_.dim < 8) throw Error(ErrorCode::InvalidConfig, "embedding dim must be >= 8");
  if (spec_.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "remote embedder needs an endpoint");
}

Vector RemoteEmbedder::embed(std::string_view text) const {
  return embed_batch({std::string(text)}).front();
}

std::vector<Vector> RemoteEmbedder::embed_batch(const std::vector<std::string>& texts) const {
  if (texts.empty()) return {};
  for (const auto& t : texts) {
    if (text::is_blank(t)) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
  }
  nlohmann::json body = {{"input", texts}, {"dimensions", spec_.dim}};
  const auto result = detail::post_json_with_retry(detail::parse_endpoint(spec_.endpoint), body.dump(),
                                                   spec_.credential, spec_.timeout, {}, *clock_);
  using detail::PostOutcome;
  if (result.outcome == PostOutcome::DeadlineExceeded) {
    throw Error(ErrorCode::DeadlineExceeded, "embedding request timed out");
  }
  if (result.outcome != PostOutcome::Ok) {
    throw Error(ErrorCode::ProviderUnavailable,
                "embedding backend returned status " + std::to_string(result.response.status));
  }

  std::vector<Vector> out;
  try {
    const auto j = nlohmann::json::parse(result.response.body);
    if (j.contains("data")) {
      for (const auto& item : j.at("data")) out.push_back(item.at("embedding").get<Vector>());
    } else {
      for (const auto& item : j.at("embeddings")) out.push_back(item.get<Vector>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ProviderUnavailable, std::string("bad embedding payload: ") + e.what());
  }
  if (out.size() != texts.size()) {
    throw Error(ErrorCode::ProviderUnavailable, "embedding count does not match input count");
  }
  for (auto& v : out) {
    if (v.size() != spec_.dim) throw Error(ErrorCode::DimMismatch, "remote embedding has wrong dim");
    for (double x : v) {
      if (!std::isfinite(x)) throw Error(ErrorCode::ProviderUnavailable, "non-finite embedding component");
    }
    normalize(v);
  }
  return out;
}

std::shared_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
  if (spec.kind == EmbedderKind::Remote) return std::make_shared<RemoteEmbedder>(spec);
  return std::make_shared<DeterministicEmbedder>(spec.dim, spec.seed);
}

}  // namespace faqpilot
