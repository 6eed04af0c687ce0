#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssr/config.hpp"
#include "ssr/metrics.hpp"

namespace ssr {

struct RunSummary {
  std::filesystem::path transcripts;
  std::size_t records = 0;
  std::size_t failed = 0;  // records carrying an error
  bool aborted = false;
  MetricValue lr_acc;
  UsageCounters usage;
};

/// Runs the configured method over tasks x repeats x slots and streams one
/// transcript per unit, in unit order, to <output_dir>/transcripts.jsonl.
RunSummary cmd_run(RunConfig config, std::ostream& log);

/// Same, over an explicit task list.
RunSummary run_tasks(const RunConfig& config, const std::vector<Task>& tasks, std::ostream& log);

struct ReportOptions {
  std::vector<std::filesystem::path> transcripts;
  // lr-acc, lr-maj@K, pass-at-k, bok-acc
  std::vector<std::string> metrics{"lr-acc", "pass-at-k"};
  std::optional<std::filesystem::path> output_dir;
  MajGrouping grouping = MajGrouping::FirstK;
  // Needed only for bok-acc.
  std::optional<RunConfig> judge;
};

/// Metric name -> value; also written as report.json and report.csv.
nlohmann::json cmd_report(const ReportOptions& options, std::ostream& out);

struct JudgeEvalOptions {
  std::vector<std::filesystem::path> transcripts;
  ThresholdRule rule = ThresholdRule::F1;
  std::optional<std::filesystem::path> output_dir;
};

/// Judge quality of the step-confidence signal under every aggregation and
/// of the verification score, as {signal: {auroc, precision_star, ...}}.
nlohmann::json cmd_judge_eval(const JudgeEvalOptions& options, std::ostream& out);

struct ScaleOptions {
  ScaleAxis axis = ScaleAxis::Sequential;
  std::vector<int> budgets;
  ParallelAggregation aggregation = ParallelAggregation::MajN;
};

/// One run per budget under <output_dir>/budget-<b>, all sharing one cache;
/// writes <output_dir>/scaling.csv. Budgets must be strictly ascending.
std::vector<ScalingRow> cmd_scale(RunConfig config, const ScaleOptions& options, std::ostream& log);

/// Writes the generated tasks as JSONL and returns them.
std::vector<Task> cmd_gen(const DatasetConfig& spec, const std::filesystem::path& out);

}  // namespace ssr
