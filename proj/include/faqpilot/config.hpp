#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "faqpilot/clock.hpp"
#include "faqpilot/embedding.hpp"
#include "faqpilot/faq_store.hpp"
#include "faqpilot/llm_gateway.hpp"
#include "faqpilot/mining.hpp"
#include "faqpilot/prompts.hpp"
#include "faqpilot/rag_client.hpp"
#include "faqpilot/suggestion_engine.hpp"

namespace faqpilot {

/// A backend the config can point at. Secrets are never stored here, only the
/// name of the environment variable that holds them.
struct BackendConfig {
  bool remote = false;
  std::string endpoint;
  std::string model = "scripted";
  std::string credential_env;
  Duration latency = Duration::zero();  // scripted only
  std::size_t max_concurrency = 16;
};

struct AppConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t http_threads = 128;
  std::size_t round_workers = 16;

  EngineConfig engine;
  BackendConfig llm;
  std::optional<BackendConfig> match_llm;
  BackendConfig rag;

  bool remote_embedder = false;
  std::size_t embedding_dim = 256;
  std::uint64_t embedding_seed = 0;
  std::string embedder_endpoint;
  std::string embedder_credential_env;

  std::optional<std::filesystem::path> store_snapshot;
  double store_dedup_threshold = 0.95;
  std::optional<std::filesystem::path> prompts_dir;

  MiningConfig mining;

  std::string agent_token_env = "FAQPILOT_AGENT_TOKEN";
  std::string supervisor_token_env = "FAQPILOT_SUPERVISOR_TOKEN";

  /// Throws invalid-config.
  void validate() const;
};

/// Parses a JSON config document. Unknown keys are rejected; relative paths
/// resolve against `base_dir`. Throws invalid-config.
AppConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
/// Throws invalid-config (including for an unreadable file).
AppConfig load_config(const std::filesystem::path& path);

/// Value of environment variable `name`. Throws invalid-config when it is
/// unset or empty; the message names the variable, never the value.
std::string resolve_secret(const std::string& name);

/// Shared providers wired from a config.
struct Runtime {
  std::shared_ptr<const Clock> clock;
  std::shared_ptr<const Embedder> embedder;
  std::shared_ptr<FaqStore> store;
  std::shared_ptr<LlmGateway> gateway;
  std::shared_ptr<RagClient> rag;
  std::shared_ptr<const PromptLibrary> prompts;

  [[nodiscard]] EngineDeps engine_deps() const { return {store, gateway, rag, prompts, clock}; }
};

/// `force_scripted` swaps every remote backend for its offline stand-in.
Runtime build_runtime(const AppConfig& config, bool force_scripted,
                      std::shared_ptr<const Clock> clock = steady_clock());

}  // namespace faqpilot
