// ssr: run refinement experiments, generate puzzles, and report metrics.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ssr/commands.hpp"
#include "ssr/error.hpp"

namespace {

using namespace ssr;

// Flags that mirror RunConfig. Each binds to a string/optional so that only
// flags actually given override the config file.
struct RunFlags {
  std::string config_path;
  std::string method, context_format, completeness, confidence_mode;
  std::optional<int> K, M, N, R, max_steps, concurrency, workers, max_reasks;
  std::optional<std::uint64_t> seed;
  bool no_early_exit = false, repair_mismatch = false, no_cache = false, final_self_eval = false;
  std::string backend, mock_script, base_url, api_path, model, api_key_env, profile;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::optional<std::int64_t> token_ceiling;
  std::optional<int> max_retries, backoff_ms;
  std::optional<int> error_step;
  std::optional<double> error_rate, judge_recall;
  std::string tasks, generator, out, cache_dir;
  std::optional<int> count, entities, attributes, steps;
  std::optional<std::uint64_t> gen_seed;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config file; flags override it");
    app.add_option("--method", method, "cot | self-refine | ssr-lin | ssr-ada | ssr-plan");
    app.add_option("-K,--iterations", K, "refinement iterations");
    app.add_option("-M,--samples-per-step", M, "re-solutions per sub-question");
    app.add_option("-N,--parallel", N, "parallel runs per task");
    app.add_option("-R,--repeats", R, "repeated experiments");
    app.add_option("--context-format", context_format, "natural | socratic");
    app.add_option("--completeness", completeness, "reflection | intervention");
    app.add_option("--confidence-mode", confidence_mode, "auto | exact-match | llm-judged");
    app.add_option("--max-steps", max_steps, "cap on sub-questions per decomposition");
    app.add_option("--seed", seed, "run seed");
    app.add_option("--max-reasks", max_reasks, "re-asks after a malformed reply");
    app.add_flag("--no-early-exit", no_early_exit, "always issue the refinement call");
    app.add_flag("--repair-mismatch", repair_mismatch, "overwrite a mismatched last sub-answer");
    app.add_flag("--final-self-eval", final_self_eval, "score the final answer (WBoN weights)");
    app.add_option("--backend", backend, "openai | mock | chain-sim");
    app.add_option("--mock-script", mock_script, "mock rules (JSON)");
    app.add_option("--base-url", base_url, "chat-completions server, scheme://host[:port]");
    app.add_option("--api-path", api_path, "request path");
    app.add_option("--model", model, "model id");
    app.add_option("--api-key-env", api_key_env, "environment variable holding the bearer token");
    app.add_option("--profile", profile, "general | reasoning sampling defaults");
    app.add_option("--temperature", temperature);
    app.add_option("--max-tokens", max_tokens);
    app.add_option("--token-ceiling", token_ceiling, "stop after this many live tokens");
    app.add_option("--max-retries", max_retries);
    app.add_option("--backoff-ms", backoff_ms, "first retry delay; doubles per retry");
    app.add_option("--error-step", error_step, "chain-sim: step that may go wrong");
    app.add_option("--error-rate", error_rate, "chain-sim: per-sample error rate");
    app.add_option("--judge-recall", judge_recall, "chain-sim: judge catches a wrong answer");
    app.add_option("--tasks", tasks, "task file (JSONL)");
    app.add_option("--gen", generator, "generate tasks instead: mini-sudoku | zebra | arith-chain");
    app.add_option("--count", count, "generated task count");
    app.add_option("--gen-seed", gen_seed, "first generator seed");
    app.add_option("--entities", entities);
    app.add_option("--attributes", attributes);
    app.add_option("--steps", steps, "arith-chain length");
    app.add_option("-o,--out", out, "output directory");
    app.add_option("--cache-dir", cache_dir, "response cache directory");
    app.add_flag("--no-cache", no_cache, "disable the response cache");
    app.add_option("--concurrency", concurrency, "backend calls in flight");
    app.add_option("--workers", workers, "runs in flight");
  }

  RunConfig build() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    auto& e = c.engine;
    if (!method.empty()) e.method = method_from_string(method);
    if (K) e.K = *K;
    if (M) e.M = *M;
    if (N) c.parallel = *N;
    if (R) c.repeats = *R;
    if (!context_format.empty()) e.context_format = context_format_from_string(context_format);
    if (!completeness.empty()) e.completeness = completeness_from_string(completeness);
    if (confidence_mode == "auto") e.confidence_mode.reset();
    else if (!confidence_mode.empty()) e.confidence_mode = confidence_mode_from_string(confidence_mode);
    if (max_steps) e.max_steps = *max_steps;
    if (max_reasks) e.max_reasks = *max_reasks;
    if (seed) c.seed = *seed;
    if (no_early_exit) e.early_exit = false;
    if (repair_mismatch) e.repair_mismatch = true;
    if (final_self_eval) e.final_self_eval = true;
    auto& b = c.backend;
    if (!backend.empty()) b.kind = backend;
    if (!mock_script.empty()) b.mock_script = mock_script;
    if (!base_url.empty()) b.openai.base_url = base_url;
    if (!api_path.empty()) b.openai.path = api_path;
    if (!model.empty()) b.openai.model_id = model;
    if (!api_key_env.empty()) b.openai.api_key_env = api_key_env;
    if (!profile.empty()) b.profile = profile;
    if (temperature) b.temperature = temperature;
    if (max_tokens) b.max_tokens = max_tokens;
    if (token_ceiling) b.token_ceiling = token_ceiling;
    if (max_retries) b.max_retries = *max_retries;
    if (backoff_ms) b.backoff_ms = *backoff_ms;
    if (error_step) b.chain_sim.error_step = *error_step;
    if (error_rate) b.chain_sim.error_rate = *error_rate;
    if (judge_recall) b.chain_sim.judge_recall = *judge_recall;
    auto& d = c.dataset;
    if (!tasks.empty()) d.path = tasks;
    if (!generator.empty()) {
      d.path.reset();
      d.generator = generator;
    }
    if (count) d.count = *count;
    if (gen_seed) d.seed = *gen_seed;
    if (entities) d.entities = *entities;
    if (attributes) d.attributes = *attributes;
    if (steps) d.steps = *steps;
    if (!out.empty()) c.output_dir = out;
    if (!cache_dir.empty()) c.cache_dir = cache_dir;
    if (no_cache) c.cache = false;
    if (concurrency) c.concurrency = *concurrency;
    if (workers) c.workers = *workers;
    return c;
  }
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Socratic self-refinement experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a method over a dataset");
  RunFlags run_flags;
  run_flags.add_to(*run);

  auto* scale = app.add_subcommand("scale", "accuracy against sequential or parallel budget");
  RunFlags scale_flags;
  scale_flags.add_to(*scale);
  std::string axis = "sequential", budgets, aggregation = "maj";
  scale->add_option("--axis", axis, "sequential | parallel");
  scale->add_option("--budgets", budgets, "ascending, comma separated (K or N values)")->required();
  scale->add_option("--aggregation", aggregation, "maj | wbon (parallel axis)");

  auto* report = app.add_subcommand("report", "metrics over transcript files");
  std::vector<std::string> report_paths;
  std::string metrics = "lr-acc,pass-at-k", report_out, grouping = "first-k";
  report->add_option("transcripts", report_paths, "transcript JSONL files")->required();
  report->add_option("--metrics", metrics, "lr-acc, lr-maj@K, pass-at-k, bok-acc");
  report->add_option("-o,--out", report_out, "directory for report.json and report.csv");
  report->add_option("--grouping", grouping, "first-k | disjoint (lr-maj@K)");
  RunFlags judge_flags;
  report->add_option("--judge-config", judge_flags.config_path, "backend config for bok-acc");
  report->add_option("--judge-backend", judge_flags.backend, "openai | mock | chain-sim");
  report->add_option("--judge-mock-script", judge_flags.mock_script);
  report->add_option("--judge-model", judge_flags.model);

  auto* judge_eval = app.add_subcommand("judge-eval", "AUROC / precision* / recall* of confidence signals");
  std::vector<std::string> eval_paths;
  std::string eval_out, rule = "f1";
  judge_eval->add_option("transcripts", eval_paths, "transcript JSONL files")->required();
  judge_eval->add_option("--threshold", rule, "f1 | youden");
  judge_eval->add_option("-o,--out", eval_out, "directory for judge_eval.json");

  auto* gen = app.add_subcommand("gen", "generate a task file");
  DatasetConfig gen_spec;
  std::string gen_out;
  gen->add_option("--kind", gen_spec.generator, "mini-sudoku | zebra | arith-chain")->required();
  gen->add_option("--count", gen_spec.count);
  gen->add_option("--seed", gen_spec.seed);
  gen->add_option("--entities", gen_spec.entities);
  gen->add_option("--attributes", gen_spec.attributes);
  gen->add_option("--steps", gen_spec.steps);
  gen->add_option("-o,--out", gen_out, "output JSONL path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto summary = cmd_run(run_flags.build(), std::cout);
      std::cout << "transcripts: " << summary.transcripts.string() << "\n";
      if (summary.aborted) {
        std::cerr << "run aborted on a backend failure\n";
        return 2;
      }
    } else if (*scale) {
      ScaleOptions options;
      if (axis == "sequential") options.axis = ScaleAxis::Sequential;
      else if (axis == "parallel") options.axis = ScaleAxis::Parallel;
      else throw Error(ErrorCode::ConfigError, axis, "unknown axis");
      if (aggregation == "maj") options.aggregation = ParallelAggregation::MajN;
      else if (aggregation == "wbon") options.aggregation = ParallelAggregation::WBoN;
      else throw Error(ErrorCode::ConfigError, aggregation, "unknown aggregation");
      for (const auto& b : split(budgets, ',')) options.budgets.push_back(std::stoi(b));
      const auto rows = cmd_scale(scale_flags.build(), options, std::cout);
      std::cout << scaling_csv(rows);
    } else if (*report) {
      ReportOptions options;
      for (const auto& p : report_paths) options.transcripts.emplace_back(p);
      options.metrics = split(metrics, ',');
      if (!report_out.empty()) options.output_dir = report_out;
      if (grouping == "disjoint") options.grouping = MajGrouping::DisjointGroups;
      else if (grouping != "first-k") throw Error(ErrorCode::ConfigError, grouping, "unknown grouping");
      if (!judge_flags.config_path.empty() || !judge_flags.backend.empty())
        options.judge = judge_flags.build();
      cmd_report(options, std::cout);
    } else if (*judge_eval) {
      JudgeEvalOptions options;
      for (const auto& p : eval_paths) options.transcripts.emplace_back(p);
      if (rule == "youden") options.rule = ThresholdRule::Youden;
      else if (rule != "f1") throw Error(ErrorCode::ConfigError, rule, "unknown threshold rule");
      if (!eval_out.empty()) options.output_dir = eval_out;
      cmd_judge_eval(options, std::cout);
    } else if (*gen) {
      const auto tasks = cmd_gen(gen_spec, gen_out);
      std::cout << "wrote " << tasks.size() << " tasks to " << gen_out << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
