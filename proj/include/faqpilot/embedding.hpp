#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "faqpilot/clock.hpp"

namespace faqpilot {

/// Dense embedding. Stored vectors are L2-normalized unless all-zero.
using Vector = std::vector<double>;

double dot(const Vector& a, const Vector& b);
double l2_norm(const Vector& v);
/// Scales v to unit length in place; the zero vector is left untouched.
void normalize(Vector& v);
/// dot(a,b) / (|a||b|). Throws dim-mismatch or zero-vector.
double cosine(const Vector& a, const Vector& b);

enum class EmbedderKind { Remote, Deterministic };

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::Deterministic;
  std::size_t dim = 256;
  std::uint64_t seed = 0;
  // remote only
  std::string endpoint;
  std::string credential;
  Duration timeout = std::chrono::seconds(2);
};

/// Text-embedding provider. Implementations are safe for concurrent calls.
class Embedder {
 public:
  virtual ~Embedder() = default;

  [[nodiscard]] virtual std::size_t dim() const noexcept = 0;
  /// Unit-length embedding of text. Throws empty-text for blank input.
  [[nodiscard]] virtual Vector embed(std::string_view text) const = 0;
  /// Element i equals embed(texts[i]). Any failure fails the whole batch.
  [[nodiscard]] virtual std::vector<Vector> embed_batch(const std::vector<std::string>& texts) const;
};

/// Signed feature hashing of lowercased character trigrams into `dim`
/// buckets, then L2 normalization. A pure function of (text, seed, dim).
class DeterministicEmbedder final : public Embedder {
 public:
  explicit DeterministicEmbedder(std::size_t dim = 256, std::uint64_t seed = 0);

  [[nodiscard]] std::size_t dim() const noexcept override { return dim_; }
  [[nodiscard]] Vector embed(std::string_view text) const override;

 private:
  std::size_t dim_;
  std::uint64_t basis_;
};

/// HTTP embedding backend. POSTs {"input": [...], "dimensions": dim} and
/// accepts either {"data":[{"embedding":[...]}]} or {"embeddings":[[...]]}.
/// Retries up to twice with exponential backoff inside the timeout.
class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderSpec spec, std::shared_ptr<const Clock> clock = steady_clock());

  [[nodiscard]] std::size_t dim() const noexcept override { return spec_.dim; }
  [[nodiscard]] Vector embed(std::string_view text) const override;
  [[nodiscard]] std::vector<Vector> embed_batch(const std::vector<std::string>& texts) const override;

 private:
  EmbedderSpec spec_;
  std::shared_ptr<const Clock> clock_;
};

std::shared_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

}  // namespace faqpilot
