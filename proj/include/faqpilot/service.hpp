#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "faqpilot/config.hpp"
#include "faqpilot/rag_client.hpp"
#include "faqpilot/suggestion_engine.hpp"

namespace faqpilot {

enum class EventKind { SuggestionSet, Answer, FaqTagged, DegradedNotice };
std::string_view to_string(EventKind k) noexcept;

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 binds any free port
  std::size_t http_threads = 128;
  std::size_t round_workers = 16;
  EngineConfig engine;
  std::string agent_token;
  std::string supervisor_token;
  std::size_t event_buffer = 64;

  /// Throws invalid-config.
  void validate() const;
};

/// Settings from a config, with bearer tokens resolved from the environment.
ServiceSettings service_settings(const AppConfig& config);

/// Cumulative counts per upper bound; the last bucket is unbounded.
struct LatencyHistogram {
  std::vector<double> bounds_ms{50, 100, 250, 500, 1000, 1500, 2000, 3000, 5000};
  std::vector<std::uint64_t> counts = std::vector<std::uint64_t>(10, 0);
  std::uint64_t count = 0;
  double sum_ms = 0.0;

  void record(double ms);
};

struct ServiceMetrics {
  std::uint64_t sets_emitted = 0;
  std::uint64_t events_emitted = 0;
  std::uint64_t sessions_started = 0;
  std::uint64_t sessions_active = 0;
  LedgerSnapshot ledger;
  RagCallCounter rag;
  LatencyHistogram match_latency;
  LatencyHistogram generate_latency;
  LatencyHistogram total_latency;
};

/// HTTP front end over one SuggestionEngine. Operations on a session run one
/// at a time in arrival order; distinct sessions proceed in parallel.
class Service {
 public:
  Service(Runtime runtime, ServiceSettings settings);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves in the background. Returns the bound port. Throws
  /// invalid-config when the address cannot be bound.
  int start();
  /// Blocks until stop() is called from another thread.
  void wait();
  void stop();

  [[nodiscard]] int port() const noexcept;
  [[nodiscard]] ServiceMetrics metrics() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace faqpilot
