#include "ssr/config.hpp"

#include <fstream>
#include <set>

#include "ssr/error.hpp"

namespace ssr {

using nlohmann::json;

namespace {

void reject_unknown(const json& doc, std::initializer_list<const char*> known, const std::string& where) {
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : doc.items())
    if (!allowed.count(key)) throw Error(ErrorCode::ConfigError, where + key, "unknown config key");
}

template <class T>
void take(const json& doc, const char* key, T& target) {
  if (doc.contains(key) && !doc[key].is_null()) target = doc[key].get<T>();
}

template <class T>
void take(const json& doc, const char* key, std::optional<T>& target) {
  if (doc.contains(key) && !doc[key].is_null()) target = doc[key].get<T>();
}

}  // namespace

void RunConfig::finalize() {
  const auto profile = SamplingProfile::named(backend.profile);
  engine.sampling.temperature = backend.temperature.value_or(profile.temperature);
  engine.sampling.max_tokens = backend.max_tokens.value_or(profile.max_tokens);
  engine.model_id = backend.openai.model_id;
  engine.parallelism = concurrency;
  if (engine.K < 0) throw Error(ErrorCode::ConfigError, "K", "must be >= 0");
  if (engine.M < 1 || engine.M > 1024) throw Error(ErrorCode::ConfigError, "M", "must lie in [1, 1024]");
  if (parallel < 1 || parallel > 1024) throw Error(ErrorCode::ConfigError, "N", "must lie in [1, 1024]");
  if (repeats < 1) throw Error(ErrorCode::ConfigError, "R", "must be >= 1");
  if (concurrency < 1) throw Error(ErrorCode::ConfigError, "concurrency", "must be >= 1");
  if (workers < 1) throw Error(ErrorCode::ConfigError, "workers", "must be >= 1");
  if (engine.max_steps && *engine.max_steps < 1)
    throw Error(ErrorCode::ConfigError, "max_steps", "must be >= 1");
  if (backend.kind != "mock" && backend.kind != "openai" && backend.kind != "chain-sim")
    throw Error(ErrorCode::ConfigError, backend.kind, "unknown backend kind");
}

RunConfig run_config_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "/", "config must be a JSON object");
  reject_unknown(doc,
                 {"method", "K", "M", "N", "R", "context_format", "completeness", "confidence_mode",
                  "max_steps", "early_exit", "repair_mismatch", "final_self_eval", "max_reasks",
                  "seed", "backend", "dataset", "output_dir", "cache_dir", "cache", "concurrency",
                  "workers"},
                 "");
  RunConfig c;
  try {
    json engine = doc;
    for (const char* key : {"N", "R", "seed", "backend", "dataset", "output_dir", "cache_dir",
                            "cache", "concurrency", "workers"})
      engine.erase(key);
    c.engine = engine_config_from_json(engine);
    take(doc, "N", c.parallel);
    take(doc, "R", c.repeats);
    take(doc, "seed", c.seed);
    take(doc, "cache", c.cache);
    take(doc, "concurrency", c.concurrency);
    take(doc, "workers", c.workers);
    if (doc.contains("output_dir")) c.output_dir = doc["output_dir"].get<std::string>();
    if (doc.contains("cache_dir") && !doc["cache_dir"].is_null())
      c.cache_dir = doc["cache_dir"].get<std::string>();

    if (doc.contains("backend")) {
      const auto& b = doc["backend"];
      reject_unknown(b,
                     {"kind", "base_url", "path", "model_id", "api_key_env", "timeout_s", "profile",
                      "temperature", "max_tokens", "token_ceiling", "mock_script", "chain_sim",
                      "max_retries", "backoff_ms"},
                     "backend.");
      take(b, "kind", c.backend.kind);
      take(b, "base_url", c.backend.openai.base_url);
      take(b, "path", c.backend.openai.path);
      take(b, "model_id", c.backend.openai.model_id);
      take(b, "api_key_env", c.backend.openai.api_key_env);
      if (b.contains("timeout_s")) c.backend.openai.timeout = std::chrono::seconds(b["timeout_s"].get<int>());
      take(b, "profile", c.backend.profile);
      take(b, "temperature", c.backend.temperature);
      take(b, "max_tokens", c.backend.max_tokens);
      take(b, "token_ceiling", c.backend.token_ceiling);
      if (b.contains("mock_script")) c.backend.mock_script = b["mock_script"].get<std::string>();
      if (b.contains("chain_sim")) c.backend.chain_sim = ChainSimConfig::from_json(b["chain_sim"]);
      take(b, "max_retries", c.backend.max_retries);
      take(b, "backoff_ms", c.backend.backoff_ms);
    }
    if (doc.contains("dataset")) {
      const auto& d = doc["dataset"];
      reject_unknown(d, {"path", "generator", "count", "seed", "entities", "attributes", "steps"},
                     "dataset.");
      if (d.contains("path")) c.dataset.path = d["path"].get<std::string>();
      take(d, "generator", c.dataset.generator);
      take(d, "count", c.dataset.count);
      take(d, "seed", c.dataset.seed);
      take(d, "entities", c.dataset.entities);
      take(d, "attributes", c.dataset.attributes);
      take(d, "steps", c.dataset.steps);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "config", e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, path.string(), "cannot open config file");
  try {
    return run_config_from_json(json::parse(in, nullptr, true, /*ignore_comments=*/true));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string(), e.what());
  }
}

json run_config_snapshot(const RunConfig& c) {
  json snap = engine_config_to_json(c.engine);
  snap["N"] = c.parallel;
  snap["R"] = c.repeats;
  snap["seed"] = c.seed;
  json backend = {{"kind", c.backend.kind}, {"profile", c.backend.profile}};
  if (c.backend.kind == "openai") {
    backend["base_url"] = c.backend.openai.base_url;
    backend["path"] = c.backend.openai.path;
  }
  if (c.backend.kind == "chain-sim") {
    const auto& s = c.backend.chain_sim;
    backend["chain_sim"] = {{"error_step", s.error_step},
                            {"error_rate", s.error_rate},
                            {"judge_recall", s.judge_recall},
                            {"judge_false_alarm", s.judge_false_alarm}};
  }
  if (c.backend.mock_script) backend["mock_script"] = c.backend.mock_script->filename().string();
  snap["backend"] = std::move(backend);
  json dataset;
  if (c.dataset.path) {
    dataset["path"] = c.dataset.path->filename().string();
  } else {
    dataset = {{"generator", c.dataset.generator}, {"count", c.dataset.count},
               {"seed", c.dataset.seed}};
    if (c.dataset.generator == "zebra") {
      dataset["entities"] = c.dataset.entities;
      dataset["attributes"] = c.dataset.attributes;
    }
    if (c.dataset.generator == "arith-chain") dataset["steps"] = c.dataset.steps;
  }
  snap["dataset"] = std::move(dataset);
  return snap;
}

std::shared_ptr<Backend> make_backend(const BackendConfig& config, std::uint64_t seed) {
  if (config.kind == "openai") return std::make_shared<OpenAiBackend>(config.openai);
  if (config.kind == "chain-sim") {
    auto sim = config.chain_sim;
    sim.seed = seed;
    return std::make_shared<ChainSimulator>(sim);
  }
  if (config.kind == "mock") {
    if (!config.mock_script)
      throw Error(ErrorCode::ConfigError, "backend.mock_script", "the mock backend needs a script");
    auto script = MockScript::load(*config.mock_script);
    script.seed ^= seed;
    return std::make_shared<MockBackend>(std::move(script));
  }
  throw Error(ErrorCode::ConfigError, config.kind, "unknown backend kind");
}

GatewayConfig gateway_config(const RunConfig& c) {
  GatewayConfig g;
  g.cache_enabled = c.cache;
  g.cache_dir = c.cache ? std::optional(c.cache_dir.value_or(c.output_dir / "cache")) : std::nullopt;
  g.max_retries = c.backend.max_retries;
  g.backoff_base = std::chrono::milliseconds(c.backend.backoff_ms);
  g.token_ceiling = c.backend.token_ceiling;
  g.max_in_flight = c.concurrency;
  return g;
}

std::vector<Task> generate_tasks(const DatasetConfig& d) {
  if (d.count < 0) throw Error(ErrorCode::ConfigError, "count", "must be >= 0");
  std::vector<Task> tasks;
  for (int i = 0; i < d.count; ++i) {
    const auto seed = d.seed + static_cast<std::uint64_t>(i);
    if (d.generator == "mini-sudoku") {
      tasks.push_back(gen_mini_sudoku(seed));
    } else if (d.generator == "zebra") {
      tasks.push_back(gen_zebra({d.entities, d.attributes, seed}));
    } else if (d.generator == "arith-chain") {
      tasks.push_back(gen_arith_chain(seed, d.steps));
    } else {
      throw Error(ErrorCode::ConfigError, d.generator, "unknown generator");
    }
  }
  return tasks;
}

std::vector<Task> resolve_dataset(const DatasetConfig& d) {
  return d.path ? load_jsonl(*d.path) : generate_tasks(d);
}

}  // namespace ssr
