#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ssr/engine.hpp"
#include "ssr/gateway.hpp"

namespace ssr {

/// Mean and sample standard deviation of a per-repeat statistic.
struct MetricValue {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

MetricValue summarize(std::span<const double> per_repeat);

/// Transcripts addressed by (repeat, task, slot). Tasks keep the order in
/// which they first appear.
class RunSet {
 public:
  RunSet() = default;
  explicit RunSet(std::vector<Transcript> transcripts);

  const std::vector<Transcript>& transcripts() const noexcept { return transcripts_; }
  std::vector<int> repeats() const;
  const std::vector<std::string>& tasks() const noexcept { return tasks_; }
  /// Slots of one (repeat, task) in slot order.
  std::vector<const Transcript*> slots(int repeat, const std::string& task) const;
  /// Smallest slot count over all (repeat, task) groups.
  std::size_t width() const;
  bool empty() const noexcept { return transcripts_.empty(); }

 private:
  std::vector<Transcript> transcripts_;
  std::vector<std::string> tasks_;
  std::map<int, std::map<std::string, std::map<int, std::size_t>>> index_;
};

/// Ground-truth check of an answer recorded in a transcript; unparseable
/// answers are wrong.
bool answer_correct(const Transcript& t, std::string_view answer);

/// Per repeat, share of (task, slot) pairs whose final answer is correct.
/// `slot` restricts the count to one parallel slot.
MetricValue lr_acc(const RunSet& runs, std::optional<int> slot = std::nullopt);

enum class MajGrouping {
  FirstK,          // one vote per task over slots 0..k-1
  DisjointGroups,  // floor(N/k) disjoint votes per task, averaged
};

/// Majority over k parallel final answers per task. Throws
/// InsufficientParallelism when a group has fewer than k slots.
MetricValue lr_maj_at_k(const RunSet& runs, int k, MajGrouping grouping = MajGrouping::FirstK);

/// A run counts if any iteration, including the first, is correct.
MetricValue pass_at_k(const RunSet& runs);

/// Best-of-iterations chosen by an LLM judge via the ensemble prompt. A reply
/// without an answer after one re-ask counts as wrong.
MetricValue bok_acc(const RunSet& runs, Gateway& judge, const SamplingProfile& sampling,
                    const std::string& model_id = {}, int parallelism = 16);

enum class Aggregation { Min, Mean, MeanLog };
std::string_view to_string(Aggregation mode);
Aggregation aggregation_from_string(std::string_view name);

/// Step-score aggregate. MeanLog floors zeros at 1 / (5 * M * 10).
double aggregate_step_scores(std::span<const double> confidences, Aggregation mode, int M = 5);

struct JudgeSample {
  double score = 0.0;
  bool is_incorrect = false;
};

enum class ThresholdRule { F1, Youden };

struct JudgeQuality {
  double auroc = 0.0;
  double precision_star = 0.0;
  double recall_star = 0.0;
  // Scores <= threshold_star are flagged as incorrect.
  double threshold_star = 0.0;
};

/// Low scores predict incorrect answers. Throws DegenerateLabels unless both
/// labels occur.
JudgeQuality judge_quality(std::span<const JudgeSample> samples,
                           ThresholdRule rule = ThresholdRule::F1);

enum class JudgeSignal { StepConfidence, Verification };

/// One sample per iteration carrying the signal; the label is the
/// correctness of the state that signal assessed (the previous iteration).
std::vector<JudgeSample> judge_samples(const RunSet& runs, JudgeSignal signal,
                                       Aggregation mode = Aggregation::Min);

enum class ScaleAxis { Sequential, Parallel };
enum class ParallelAggregation { MajN, WBoN };

struct ScalingRow {
  int budget = 0;
  double accuracy = 0.0;
  double std = 0.0;
  double est_tokens = 0.0;  // mean prompt + completion tokens per task
};

/// One row per budget. Sequential rows score the final answers of the run
/// set stored under that K; parallel rows vote over the N slots of the run set
/// stored under that N. Throws MissingBudget for an absent budget.
std::vector<ScalingRow> scaling_series(const std::map<int, RunSet>& by_budget,
                                       std::span<const int> budgets, ScaleAxis axis,
                                       ParallelAggregation aggregation = ParallelAggregation::MajN);

/// Sequential series from one run: the row for K uses the state after K
/// iterations and the tokens spent up to it.
std::vector<ScalingRow> sequential_from_run(const RunSet& runs, std::span<const int> budgets);

/// Parallel series from one run: the row for N votes over slots 0..N-1.
std::vector<ScalingRow> parallel_from_run(const RunSet& runs, std::span<const int> budgets,
                                          ParallelAggregation aggregation);

std::string scaling_csv(std::span<const ScalingRow> rows);

}  // namespace ssr
