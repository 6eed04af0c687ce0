#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssr/error.hpp"
#include "ssr/gateway.hpp"
#include "ssr/prompts.hpp"
#include "ssr/taskgen.hpp"
#include "ssr/types.hpp"

namespace ssr {

enum class Method { CoT, SelfRefine, SsrLin, SsrAda, SsrPlan };
enum class ContextFormat { Natural, Socratic };
enum class Completeness { Reflection, Intervention };
enum class ConfidenceMode { ExactMatch, LlmJudged };
enum class Route { None, SelfRefine, Socratic, Plan };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);
std::string_view to_string(ContextFormat format);
ContextFormat context_format_from_string(std::string_view name);
std::string_view to_string(Completeness completeness);
Completeness completeness_from_string(std::string_view name);
std::string_view to_string(ConfidenceMode mode);
ConfidenceMode confidence_mode_from_string(std::string_view name);
std::string_view to_string(Route route);
Route route_from_string(std::string_view name);

/// M re-solutions of one sub-question. Samples whose answer could not be
/// extracted are nullopt and share a single class that never wins a vote.
struct ReferenceSet {
  int step_index = 0;
  std::vector<std::optional<std::string>> samples;
  std::vector<std::vector<std::size_t>> classes;
  std::optional<std::size_t> unparseable_class;

  std::size_t size() const { return samples.size(); }
};

struct StepConfidence {
  int step_index = 0;
  // Match count (ExactMatch) or judge score 0..5 (LlmJudged).
  int raw_score = 0;
  double normalized = 0.0;
  ConfidenceMode mode = ConfidenceMode::ExactMatch;
};

struct SocraticFeedback {
  int step_index = 0;
  std::string sub_question;
  std::string original_answer;
  std::string revised_answer;
};

struct CallRecord {
  PromptKind kind = PromptKind::CoT;
  // Inside Engine::run: an identical request came earlier in the same run.
  // Hits across runs or tasks show up only in the gateway's usage counters.
  bool cache_hit = false;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

/// One state (z^(k), y^(k)) and how it was reached. For Socratic passes the
/// decomposition, references and confidences describe the previous state.
struct IterationRecord {
  int k = 0;
  Route route = Route::None;
  std::string trace;
  std::string answer;
  std::optional<Decomposition> decomposition;
  std::vector<ReferenceSet> references;
  std::optional<std::vector<StepConfidence>> confidences;
  std::optional<SocraticFeedback> feedback;
  std::optional<int> judge_score;
  std::optional<std::string> judge_text;
  std::optional<bool> plan_changed;
  bool early_exit = false;
  std::vector<std::string> warnings;
  std::optional<std::string> error;
  std::vector<CallRecord> calls;
};

struct Totals {
  std::int64_t calls = 0;
  std::int64_t cache_hits = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

inline constexpr int kTranscriptSchemaMajor = 1;
inline constexpr const char* kTranscriptSchemaVersion = "1.0";

struct Transcript {
  std::string schema_version = kTranscriptSchemaVersion;
  std::string task_id;
  std::string question;
  std::string ground_truth;
  AnswerKind answer_kind = AnswerKind::Numeric;
  Method method = Method::CoT;
  std::uint64_t seed = 0;
  int repeat = 0;
  int slot = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<IterationRecord> iterations;
  // Optional closing self-evaluation (weights for weighted best-of-N).
  std::optional<int> final_score;
  std::vector<CallRecord> final_calls;
  Totals totals;
  std::optional<std::string> error;
  // Set when a transport or budget failure stopped the run early.
  bool aborted = false;

  const std::string& final_answer() const;
};

struct EngineConfig {
  Method method = Method::SsrLin;
  int K = 3;
  int M = 5;
  ContextFormat context_format = ContextFormat::Natural;
  Completeness completeness = Completeness::Reflection;
  // Unset: ExactMatch for numeric tasks, LlmJudged for the rest.
  std::optional<ConfidenceMode> confidence_mode;
  std::optional<int> max_steps;
  // Skip the refine call when every step is unanimous and the vote agrees.
  bool early_exit = true;
  // On a final-answer mismatch, overwrite a_T with y instead of failing.
  bool repair_mismatch = false;
  // One closing Verification call whose score weights WBoN.
  bool final_self_eval = false;
  SamplingProfile sampling;
  std::string model_id;
  int parallelism = 16;
  int max_reasks = 1;

  ConfidenceMode confidence_for(AnswerKind kind) const;
};

/// Equivalence used inside reference sets: numeric when both sides parse as
/// numbers for a numeric task, otherwise normalized exact-string.
bool sub_answers_equivalent(std::string_view a, std::string_view b, AnswerKind task_kind);

/// Number of parsed samples equivalent to `answer`.
int count_matches(std::string_view answer, const ReferenceSet& refs, AnswerKind task_kind);

/// Partition of the parsed samples; unparseable samples form one extra class.
void classify(ReferenceSet& refs, AnswerKind task_kind);

/// argmin of normalized confidence, ties to the earliest step.
int select_weakest(const std::vector<StepConfidence>& confidences);

/// First-sampled member of the largest parsed class, ties to the class sampled
/// first. Throws AllUnparseable when nothing parsed.
std::string majority_sub_answer(const ReferenceSet& refs);

struct CotResult {
  std::string trace;
  std::string answer;
};

struct SelfRefineResult {
  std::string judge_text;
  int score = 0;
  std::optional<CotResult> refined;  // unset when the refine call was skipped
};

struct PlanRefineResult {
  CotResult output;
  bool changed = false;
  Decomposition plan;
  std::string judgement;
};

/// Runs the refinement methods on one task through a gateway. Every call is
/// logged into the IterationRecord passed in; `base` is the sample-index
/// prefix that keeps parallel runs of the same task distinct.
class Engine {
 public:
  Engine(Gateway& gateway, EngineConfig config);

  const EngineConfig& config() const noexcept { return config_; }

  CotResult generate_cot(const Task& task, IterationRecord& log, std::uint64_t base = 0);

  Decomposition decompose(const Task& task, const std::string& trace, const std::string& answer,
                          IterationRecord& log, std::uint64_t base = 0,
                          bool check_answer = true);

  /// Re-solves every listed step M times, fanned out through the gateway.
  std::vector<ReferenceSet> sample_reference_sets(const Task& task, const Decomposition& d,
                                                  const std::vector<int>& steps,
                                                  IterationRecord& log, std::uint64_t base = 0);
  ReferenceSet sample_reference_set(const Task& task, const Decomposition& d, int step,
                                    IterationRecord& log, std::uint64_t base = 0);

  StepConfidence estimate_confidence(const Task& task, const std::string& answer,
                                     const ReferenceSet& refs, ConfidenceMode mode,
                                     IterationRecord& log, std::uint64_t base = 0);

  CotResult refine_with_feedback(const Task& task, const std::string& trace,
                                 const std::string& answer, const Decomposition& d,
                                 const SocraticFeedback& feedback, IterationRecord& log,
                                 std::uint64_t base = 0);

  SelfRefineResult self_refine_round(const Task& task, const std::string& trace,
                                     const std::string& answer, bool skip_if_perfect,
                                     IterationRecord& log, std::uint64_t base = 0);

  PlanRefineResult plan_refine(const Task& task, const std::string& trace,
                               const std::string& answer, IterationRecord& log,
                               std::uint64_t base = 0);

  /// One Socratic pass over (trace, answer); fills decomposition, references,
  /// confidences, feedback and the new state into `log`.
  void socratic_pass(const Task& task, const std::string& trace, const std::string& answer,
                     IterationRecord& log, std::uint64_t base);

  /// Full method run. `salt` separates repeats and parallel slots.
  Transcript run(const Task& task, std::uint64_t seed = 0, int repeat = 0, int slot = 0,
                 std::uint64_t salt = 0);

  /// Rendered prompts, exposed so context contracts can be checked directly.
  std::string solve_sub_question_prompt(const Task& task, const Decomposition& d, int step) const;
  std::string confidence_prompt(const Task& task, const std::string& answer,
                                const ReferenceSet& refs) const;
  std::string refine_prompt(const Task& task, const std::string& trace, const Decomposition& d,
                            const SocraticFeedback& feedback) const;

 private:
  ChatRequest request(std::string prompt, std::uint64_t sample_index, std::uint32_t attempt) const;
  ChatResponse call(PromptKind kind, const std::string& prompt, std::uint64_t sample_index,
                    std::uint32_t attempt, IterationRecord& log);

  // Issues the prompt, re-asking on a malformed reply up to max_reasks
  // times; `attempt` advances with every call made.
  template <class Parse>
  auto ask(PromptKind kind, const std::string& prompt, std::uint64_t sample_index,
           IterationRecord& log, Parse parse, std::uint32_t& attempt);

  Gateway& gateway_;
  EngineConfig config_;
};

/// Snapshot of the knobs that shape a transcript (parallelism excluded: it
/// never changes outputs).
nlohmann::json engine_config_to_json(const EngineConfig& config);
EngineConfig engine_config_from_json(const nlohmann::json& doc);

/// Composes the request sample index from a run salt, iteration and slot.
std::uint64_t sample_index_for(std::uint64_t salt, int k, int index);

/// True for errors caused by a malformed model reply rather than transport.
bool is_reply_error(const Error& error);

}  // namespace ssr
