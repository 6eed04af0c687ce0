#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssr/backends.hpp"
#include "ssr/chain_sim.hpp"
#include "ssr/engine.hpp"
#include "ssr/taskgen.hpp"

namespace ssr {

struct BackendConfig {
  std::string kind = "mock";  // openai | mock | chain-sim
  OpenAiConfig openai;
  std::string profile = "general";
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::optional<std::int64_t> token_ceiling;
  std::optional<std::filesystem::path> mock_script;
  ChainSimConfig chain_sim;
  int max_retries = 3;
  int backoff_ms = 1000;
};

struct DatasetConfig {
  std::optional<std::filesystem::path> path;
  std::string generator = "arith-chain";  // mini-sudoku | zebra | arith-chain
  int count = 10;
  std::uint64_t seed = 0;
  int entities = 3;
  int attributes = 3;
  int steps = 4;
};

struct RunConfig {
  EngineConfig engine;
  int parallel = 1;  // N slots per task
  int repeats = 1;   // R
  std::uint64_t seed = 0;
  BackendConfig backend;
  DatasetConfig dataset;
  std::filesystem::path output_dir = "runs/latest";
  std::optional<std::filesystem::path> cache_dir;  // default: <output_dir>/cache
  bool cache = true;
  int concurrency = 16;  // backend calls in flight across the run
  int workers = 4;       // (task, repeat, slot) units in flight

  /// Resolves the sampling profile and validates ranges; throws ConfigError.
  void finalize();
};

/// Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// The part of a config that determines transcript contents. Paths and
/// concurrency knobs are left out so reruns elsewhere serialize identically.
nlohmann::json run_config_snapshot(const RunConfig& config);

/// The chosen backend, seeded from the run seed. Throws ConfigError (naming
/// the environment variable) when a live backend has no key.
std::shared_ptr<Backend> make_backend(const BackendConfig& config, std::uint64_t seed);

GatewayConfig gateway_config(const RunConfig& config);

std::vector<Task> generate_tasks(const DatasetConfig& config);
std::vector<Task> resolve_dataset(const DatasetConfig& config);

}  // namespace ssr
