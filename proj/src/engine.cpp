#include "ssr/engine.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <utility>

#include "ssr/error.hpp"
#include "ssr/verify.hpp"

namespace ssr {

namespace {

template <class Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table, Enum value) {
  for (const auto& [e, name] : table)
    if (e == value) return name;
  return "?";
}

template <class Enum, std::size_t N>
Enum parse_name(const std::array<std::pair<Enum, std::string_view>, N>& table,
                std::string_view name, std::string_view what) {
  for (const auto& [e, n] : table)
    if (n == name) return e;
  throw Error(ErrorCode::ConfigError, std::string(name), "unknown " + std::string(what));
}

constexpr std::array<std::pair<Method, std::string_view>, 5> kMethods{{
    {Method::CoT, "cot"},
    {Method::SelfRefine, "self-refine"},
    {Method::SsrLin, "ssr-lin"},
    {Method::SsrAda, "ssr-ada"},
    {Method::SsrPlan, "ssr-plan"},
}};
constexpr std::array<std::pair<ContextFormat, std::string_view>, 2> kFormats{{
    {ContextFormat::Natural, "natural"},
    {ContextFormat::Socratic, "socratic"},
}};
constexpr std::array<std::pair<Completeness, std::string_view>, 2> kCompleteness{{
    {Completeness::Reflection, "reflection"},
    {Completeness::Intervention, "intervention"},
}};
constexpr std::array<std::pair<ConfidenceMode, std::string_view>, 2> kModes{{
    {ConfidenceMode::ExactMatch, "exact-match"},
    {ConfidenceMode::LlmJudged, "llm-judged"},
}};
constexpr std::array<std::pair<Route, std::string_view>, 4> kRoutes{{
    {Route::None, "none"},
    {Route::SelfRefine, "selfrefine"},
    {Route::Socratic, "socratic"},
    {Route::Plan, "plan"},
}};

// Iteration slot reserved for the closing self-evaluation.
constexpr int kFinalEvalIteration = 1023;

// Keys already requested by the transcript being built on this thread. With
// it, cache_hit means "an identical request came earlier in this run", which
// does not depend on thread timing or on what a previous run left on disk.
thread_local std::set<std::string>* t_seen_keys = nullptr;

void record_call(IterationRecord& log, PromptKind kind, const Gateway& gateway,
                 const ChatRequest& request, const ChatResponse& response) {
  bool hit = response.cached;
  if (t_seen_keys) {
    hit = gateway.config().cache_enabled &&
          !t_seen_keys->insert(cache_key(request, gateway.config().sample_distinct)).second;
  }
  log.calls.push_back({kind, hit, response.prompt_tokens, response.completion_tokens});
}

std::string answer_or_placeholder(const std::optional<std::string>& sample) {
  return sample ? *sample : std::string("(no answer)");
}

}  // namespace

std::string_view to_string(Method method) { return name_of(kMethods, method); }
Method method_from_string(std::string_view name) { return parse_name(kMethods, name, "method"); }
std::string_view to_string(ContextFormat format) { return name_of(kFormats, format); }
ContextFormat context_format_from_string(std::string_view name) {
  return parse_name(kFormats, name, "context format");
}
std::string_view to_string(Completeness completeness) { return name_of(kCompleteness, completeness); }
Completeness completeness_from_string(std::string_view name) {
  return parse_name(kCompleteness, name, "context completeness");
}
std::string_view to_string(ConfidenceMode mode) { return name_of(kModes, mode); }
ConfidenceMode confidence_mode_from_string(std::string_view name) {
  return parse_name(kModes, name, "confidence mode");
}
std::string_view to_string(Route route) { return name_of(kRoutes, route); }
Route route_from_string(std::string_view name) { return parse_name(kRoutes, name, "route"); }

const std::string& Transcript::final_answer() const {
  static const std::string empty;
  return iterations.empty() ? empty : iterations.back().answer;
}

ConfidenceMode EngineConfig::confidence_for(AnswerKind kind) const {
  if (confidence_mode) return *confidence_mode;
  return kind == AnswerKind::Numeric ? ConfidenceMode::ExactMatch : ConfidenceMode::LlmJudged;
}

nlohmann::json engine_config_to_json(const EngineConfig& c) {
  return {{"method", to_string(c.method)},
          {"K", c.K},
          {"M", c.M},
          {"context_format", to_string(c.context_format)},
          {"completeness", to_string(c.completeness)},
          {"confidence_mode",
           c.confidence_mode ? nlohmann::json(to_string(*c.confidence_mode)) : nlohmann::json("auto")},
          {"max_steps", c.max_steps ? nlohmann::json(*c.max_steps) : nlohmann::json(nullptr)},
          {"early_exit", c.early_exit},
          {"repair_mismatch", c.repair_mismatch},
          {"final_self_eval", c.final_self_eval},
          {"temperature", c.sampling.temperature},
          {"max_tokens", c.sampling.max_tokens},
          {"model_id", c.model_id},
          {"max_reasks", c.max_reasks}};
}

EngineConfig engine_config_from_json(const nlohmann::json& doc) {
  EngineConfig c;
  if (doc.contains("method")) c.method = method_from_string(doc["method"].get<std::string>());
  c.K = doc.value("K", c.K);
  c.M = doc.value("M", c.M);
  if (doc.contains("context_format"))
    c.context_format = context_format_from_string(doc["context_format"].get<std::string>());
  if (doc.contains("completeness"))
    c.completeness = completeness_from_string(doc["completeness"].get<std::string>());
  if (doc.contains("confidence_mode") && doc["confidence_mode"] != "auto")
    c.confidence_mode = confidence_mode_from_string(doc["confidence_mode"].get<std::string>());
  if (doc.contains("max_steps") && !doc["max_steps"].is_null())
    c.max_steps = doc["max_steps"].get<int>();
  c.early_exit = doc.value("early_exit", c.early_exit);
  c.repair_mismatch = doc.value("repair_mismatch", c.repair_mismatch);
  c.final_self_eval = doc.value("final_self_eval", c.final_self_eval);
  c.sampling.temperature = doc.value("temperature", c.sampling.temperature);
  c.sampling.max_tokens = doc.value("max_tokens", c.sampling.max_tokens);
  c.model_id = doc.value("model_id", c.model_id);
  c.max_reasks = doc.value("max_reasks", c.max_reasks);
  return c;
}

std::uint64_t sample_index_for(std::uint64_t salt, int k, int index) {
  return (salt << 20) | (static_cast<std::uint64_t>(k & 0x3ff) << 10) |
         static_cast<std::uint64_t>(index & 0x3ff);
}

bool is_reply_error(const Error& error) {
  switch (error.code()) {
    case ErrorCode::TagMissing:
    case ErrorCode::TagUnclosed:
    case ErrorCode::JsonNotFound:
    case ErrorCode::SchemaMismatch:
    case ErrorCode::EmptyDecomposition:
    case ErrorCode::NotAnInteger:
    case ErrorCode::OutOfRange:
    case ErrorCode::DecompositionMismatch:
    case ErrorCode::AllUnparseable:
    case ErrorCode::Unparseable:
      return true;
    default:
      return false;
  }
}

// ----------------------------------------------------------- step algebra

bool sub_answers_equivalent(std::string_view a, std::string_view b, AnswerKind task_kind) {
  if (task_kind != AnswerKind::ExactString) {
    try {
      return equivalent(normalize(a, task_kind), normalize(b, task_kind));
    } catch (const Error&) {
      // Intermediate answers need not share the final answer's shape.
    }
  }
  return equivalent(a, b, AnswerKind::ExactString);
}

int count_matches(std::string_view answer, const ReferenceSet& refs, AnswerKind task_kind) {
  int matches = 0;
  for (const auto& sample : refs.samples)
    if (sample && sub_answers_equivalent(answer, *sample, task_kind)) ++matches;
  return matches;
}

void classify(ReferenceSet& refs, AnswerKind task_kind) {
  refs.classes.clear();
  refs.unparseable_class.reset();
  std::vector<std::size_t> unparseable;
  for (std::size_t i = 0; i < refs.samples.size(); ++i) {
    if (!refs.samples[i]) {
      unparseable.push_back(i);
      continue;
    }
    bool placed = false;
    for (auto& cls : refs.classes) {
      if (sub_answers_equivalent(*refs.samples[cls.front()], *refs.samples[i], task_kind)) {
        cls.push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) refs.classes.push_back({i});
  }
  if (!unparseable.empty()) {
    refs.unparseable_class = refs.classes.size();
    refs.classes.push_back(std::move(unparseable));
  }
}

int select_weakest(const std::vector<StepConfidence>& confidences) {
  if (confidences.empty()) throw Error(ErrorCode::EmptyConfidences, "select_weakest");
  std::size_t best = 0;
  for (std::size_t i = 1; i < confidences.size(); ++i)
    if (confidences[i].normalized < confidences[best].normalized) best = i;
  return confidences[best].step_index;
}

std::string majority_sub_answer(const ReferenceSet& refs) {
  const std::vector<std::size_t>* best = nullptr;
  for (std::size_t c = 0; c < refs.classes.size(); ++c) {
    if (refs.unparseable_class && *refs.unparseable_class == c) continue;
    const auto& cls = refs.classes[c];
    if (!best || cls.size() > best->size() ||
        (cls.size() == best->size() && cls.front() < best->front()))
      best = &cls;
  }
  if (!best) throw Error(ErrorCode::AllUnparseable, "step " + std::to_string(refs.step_index));
  return *refs.samples[best->front()];
}

// ----------------------------------------------------------------- engine

Engine::Engine(Gateway& gateway, EngineConfig config) : gateway_(gateway), config_(std::move(config)) {
  if (config_.K < 0) throw Error(ErrorCode::ConfigError, "K", "must be >= 0");
  if (config_.M < 1 || config_.M > 1024) throw Error(ErrorCode::ConfigError, "M", "must lie in [1, 1024]");
  if (config_.K >= kFinalEvalIteration) throw Error(ErrorCode::ConfigError, "K", "too large");
  if (config_.max_reasks < 0) throw Error(ErrorCode::ConfigError, "max_reasks", "must be >= 0");
  if (config_.parallelism < 1) throw Error(ErrorCode::ConfigError, "parallelism", "must be >= 1");
}

ChatRequest Engine::request(std::string prompt, std::uint64_t sample_index,
                            std::uint32_t attempt) const {
  ChatRequest req = ChatRequest::user(std::move(prompt));
  req.temperature = config_.sampling.temperature;
  req.max_tokens = config_.sampling.max_tokens;
  req.model_id = config_.model_id;
  req.sample_index = sample_index;
  req.attempt = attempt;
  return req;
}

ChatResponse Engine::call(PromptKind kind, const std::string& prompt, std::uint64_t sample_index,
                          std::uint32_t attempt, IterationRecord& log) {
  const auto req = request(prompt, sample_index, attempt);
  auto response = gateway_.complete(req);
  record_call(log, kind, gateway_, req, response);
  return response;
}

template <class Parse>
auto Engine::ask(PromptKind kind, const std::string& prompt, std::uint64_t sample_index,
                 IterationRecord& log, Parse parse, std::uint32_t& attempt) {
  for (int tries = 0;; ++tries) {
    const auto response = call(kind, prompt, sample_index, attempt++, log);
    try {
      return parse(response.text);
    } catch (const Error& e) {
      if (!is_reply_error(e) || tries >= config_.max_reasks) throw;
      log.warnings.push_back(std::string(to_string(kind)) + " re-asked: " + e.what());
    }
  }
}

CotResult Engine::generate_cot(const Task& task, IterationRecord& log, std::uint64_t base) {
  const auto prompt = render(PromptKind::CoT, task.domain(), {{"question", task.question}});
  std::uint32_t attempt = 0;
  return ask(PromptKind::CoT, prompt, base, log,
             [](const std::string& text) { return CotResult{text, extract_tag(text, "answer")}; },
             attempt);
}

Decomposition Engine::decompose(const Task& task, const std::string& trace,
                                const std::string& answer, IterationRecord& log,
                                std::uint64_t base, bool check_answer) {
  const auto prompt =
      render_decompose_capped(task.domain(), task.question, trace, answer, config_.max_steps);
  std::uint32_t attempt = 0;
  auto d = ask(PromptKind::DecomposeSSR, prompt, base, log,
               [](const std::string& text) { return parse_decomposition(text); }, attempt);
  d.source_trace = trace;
  d.source_answer = answer;
  if (config_.max_steps && static_cast<int>(d.steps.size()) > *config_.max_steps)
    log.warnings.push_back("decomposition has " + std::to_string(d.steps.size()) +
                           " steps, above the cap of " + std::to_string(*config_.max_steps));
  if (check_answer) {
    auto& last = d.steps.back().sub_answer;
    if (!sub_answers_equivalent(last, answer, task.kind)) {
      if (!config_.repair_mismatch)
        throw Error(ErrorCode::DecompositionMismatch, "a_T=" + last + " y=" + answer,
                    "last sub-answer differs from the final answer");
      log.warnings.push_back("last sub-answer '" + last + "' overwritten with '" + answer + "'");
      last = answer;
    }
  }
  return d;
}

std::string Engine::solve_sub_question_prompt(const Task& task, const Decomposition& d,
                                              int step) const {
  const std::span<const SocraticStep> prior(d.steps.data(), static_cast<std::size_t>(step));
  return render(PromptKind::SolveSubQuestion, task.domain(),
                {{"question", task.question},
                 {"socratic_reasoning_trajectory", format_socratic_trajectory(prior)},
                 {"next_sub_question", d.steps[step].sub_question}});
}

std::vector<ReferenceSet> Engine::sample_reference_sets(const Task& task, const Decomposition& d,
                                                        const std::vector<int>& steps,
                                                        IterationRecord& log, std::uint64_t base) {
  const int M = config_.M;
  std::vector<std::string> prompts;
  std::vector<ChatRequest> requests;
  for (int t : steps) {
    if (t < 0 || t >= static_cast<int>(d.steps.size()))
      throw Error(ErrorCode::InvalidArgument, "step " + std::to_string(t), "outside the decomposition");
    prompts.push_back(solve_sub_question_prompt(task, d, t));
    for (int m = 0; m < M; ++m) requests.push_back(request(prompts.back(), base + m, 0));
  }
  const auto responses = gateway_.complete_many(requests, config_.parallelism);

  std::vector<ReferenceSet> sets;
  for (std::size_t s = 0; s < steps.size(); ++s) {
    ReferenceSet refs;
    refs.step_index = steps[s];
    for (int m = 0; m < M; ++m) {
      const auto& response = responses[s * M + m];
      record_call(log, PromptKind::SolveSubQuestion, gateway_, requests[s * M + m], response);
      auto parsed = find_tag(response.text, "answer");
      // Same prompt, same sample slot: the re-ask differs only by attempt.
      for (int tries = 0; !parsed && tries < config_.max_reasks; ++tries) {
        const auto again = call(PromptKind::SolveSubQuestion, prompts[s], base + m,
                                static_cast<std::uint32_t>(tries + 1), log);
        parsed = find_tag(again.text, "answer");
      }
      if (!parsed || parsed->empty()) {
        log.warnings.push_back("step " + std::to_string(steps[s]) + " sample " +
                               std::to_string(m) + " unparseable");
        parsed.reset();
      }
      refs.samples.push_back(std::move(parsed));
    }
    classify(refs, task.kind);
    sets.push_back(std::move(refs));
  }
  return sets;
}

ReferenceSet Engine::sample_reference_set(const Task& task, const Decomposition& d, int step,
                                          IterationRecord& log, std::uint64_t base) {
  return std::move(sample_reference_sets(task, d, {step}, log, base).front());
}

std::string Engine::confidence_prompt(const Task& task, const std::string& answer,
                                      const ReferenceSet& refs) const {
  std::vector<std::string> answers;
  for (const auto& sample : refs.samples) answers.push_back(answer_or_placeholder(sample));
  return render(PromptKind::ConfidenceEstimate, task.domain(),
                {{"prediction", answer}, {"answers", format_reference_answers(answers)}});
}

StepConfidence Engine::estimate_confidence(const Task& task, const std::string& answer,
                                           const ReferenceSet& refs, ConfidenceMode mode,
                                           IterationRecord& log, std::uint64_t base) {
  if (refs.samples.empty()) throw Error(ErrorCode::InvalidArgument, "reference set", "empty");
  StepConfidence conf;
  conf.step_index = refs.step_index;
  conf.mode = mode;
  if (mode == ConfidenceMode::ExactMatch) {
    conf.raw_score = count_matches(answer, refs, task.kind);
    conf.normalized = static_cast<double>(conf.raw_score) / static_cast<double>(refs.size());
    return conf;
  }
  const auto prompt = confidence_prompt(task, answer, refs);
  std::uint32_t attempt = 0;
  const auto parse = [](const std::string& text) { return parse_score(text); };
  int score = ask(PromptKind::ConfidenceEstimate, prompt, base, log, parse, attempt);
  if (score < 0) {
    score = ask(PromptKind::ConfidenceEstimate, prompt, base, log, parse, attempt);
    if (score < 0) {
      log.warnings.push_back("step " + std::to_string(refs.step_index) +
                             " confidence undetermined twice; scored 0");
      score = 0;
    }
  }
  conf.raw_score = score;
  conf.normalized = score / 5.0;
  return conf;
}

std::string Engine::refine_prompt(const Task& task, const std::string& trace,
                                  const Decomposition& d, const SocraticFeedback& fb) const {
  const auto domain = task.domain();
  const auto instruction = render(PromptKind::CoT, domain, {{"question", task.question}});
  if (config_.completeness == Completeness::Intervention) {
    std::string partial;
    const std::span<const SocraticStep> prior(d.steps.data(), static_cast<std::size_t>(fb.step_index));
    if (config_.context_format == ContextFormat::Natural) {
      const auto cut = fb.original_answer.empty() ? std::string::npos : trace.find(fb.original_answer);
      partial = cut != std::string::npos ? trace.substr(0, cut) : format_socratic_trajectory(prior);
    } else {
      partial = format_socratic_trajectory(prior);
    }
    return render(PromptKind::Intervention, domain,
                  {{"cot_instruction", instruction},
                   {"partial_reasoning_trace", partial},
                   {"wrong_question", fb.sub_question},
                   {"revised_answer", fb.revised_answer}});
  }
  const auto reflection = render(PromptKind::Reflection, domain,
                                 {{"wrong_question", fb.sub_question},
                                  {"wrong_answer", fb.original_answer},
                                  {"revised_answer", fb.revised_answer}});
  const auto context = config_.context_format == ContextFormat::Natural
                           ? trace
                           : format_socratic_trajectory(d.steps);
  return render(PromptKind::RefineSSR, domain,
                {{"cot_instruction", instruction},
                 {"cot_reasoning_trace", context},
                 {"reflection", reflection}});
}

CotResult Engine::refine_with_feedback(const Task& task, const std::string& trace,
                                       const std::string& /*answer*/, const Decomposition& d,
                                       const SocraticFeedback& feedback, IterationRecord& log,
                                       std::uint64_t base) {
  const bool intervention = config_.completeness == Completeness::Intervention;
  const auto kind = intervention ? PromptKind::Intervention : PromptKind::RefineSSR;
  std::uint32_t attempt = 0;
  auto result = ask(kind, refine_prompt(task, trace, d, feedback), base, log,
                    [](const std::string& text) { return CotResult{text, extract_tag(text, "answer")}; },
                    attempt);
  if (!intervention && !find_tag(result.trace, "evaluation"))
    log.warnings.push_back("refinement lacks an <evaluation> block");
  return result;
}

SelfRefineResult Engine::self_refine_round(const Task& task, const std::string& trace,
                                           const std::string& /*answer*/, bool skip_if_perfect,
                                           IterationRecord& log, std::uint64_t base) {
  const auto domain = task.domain();
  SelfRefineResult result;
  const auto verify_prompt =
      render(PromptKind::Verification, domain, {{"question", task.question}, {"response", trace}});
  std::uint32_t attempt = 0;
  std::tie(result.judge_text, result.score) =
      ask(PromptKind::Verification, verify_prompt, base, log,
          [](const std::string& text) { return std::pair(text, parse_score(text)); }, attempt);
  if (result.score < 0) {
    log.warnings.push_back("judge returned -1; scored 0");
    result.score = 0;
  }
  if (skip_if_perfect && result.score == 5) return result;

  const auto refine_prompt_text = render(PromptKind::RefineNormal, domain,
                                         {{"question", task.question},
                                          {"original_cot_response", trace},
                                          {"judge_response", result.judge_text}});
  attempt = 0;
  result.refined = ask(PromptKind::RefineNormal, refine_prompt_text, base, log,
                       [](const std::string& text) { return CotResult{text, extract_tag(text, "answer")}; },
                       attempt);
  return result;
}

PlanRefineResult Engine::plan_refine(const Task& task, const std::string& trace,
                                     const std::string& answer, IterationRecord& log,
                                     std::uint64_t base) {
  const auto domain = task.domain();
  PlanRefineResult result;
  result.output = {trace, answer};
  result.plan = decompose(task, trace, answer, log, base, /*check_answer=*/false);
  const auto plan_text = format_plan(result.plan.steps);

  const auto judge_prompt =
      render(PromptKind::PlanJudge, domain, {{"question", task.question}, {"plan", plan_text}});
  std::uint32_t attempt = 0;
  const auto [adequate, judgement] = ask(
      PromptKind::PlanJudge, judge_prompt, base, log,
      [](const std::string& text) {
        auto verdict = extract_tag(text, "verdict");
        std::transform(verdict.begin(), verdict.end(), verdict.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (verdict != "adequate" && verdict != "inadequate")
          throw Error(ErrorCode::SchemaMismatch, "verdict", "expected adequate or inadequate");
        return std::pair(verdict == "adequate", find_tag(text, "evaluation").value_or(text));
      },
      attempt);
  result.judgement = judgement;
  if (adequate) return result;

  const auto rewrite_prompt = render(PromptKind::PlanRefine, domain,
                                     {{"question", task.question},
                                      {"original_cot_response", trace},
                                      {"plan", plan_text},
                                      {"plan_judgement", judgement}});
  attempt = 0;
  result.output = ask(PromptKind::PlanRefine, rewrite_prompt, base, log,
                      [](const std::string& text) { return CotResult{text, extract_tag(text, "answer")}; },
                      attempt);
  result.changed = true;
  return result;
}

void Engine::socratic_pass(const Task& task, const std::string& trace, const std::string& answer,
                           IterationRecord& log, std::uint64_t base) {
  log.trace = trace;
  log.answer = answer;
  const auto d = decompose(task, trace, answer, log, base);
  log.decomposition = d;

  std::vector<int> steps(d.steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) steps[t] = static_cast<int>(t);
  log.references = sample_reference_sets(task, d, steps, log, base);

  const auto mode = config_.confidence_for(task.kind);
  std::vector<StepConfidence> confidences;
  for (const auto& refs : log.references)
    confidences.push_back(
        estimate_confidence(task, d.steps[refs.step_index].sub_answer, refs, mode, log, base));
  log.confidences = confidences;

  const int weakest = select_weakest(confidences);
  const auto& step = d.steps[weakest];
  SocraticFeedback feedback{weakest, step.sub_question, step.sub_answer,
                            majority_sub_answer(log.references[weakest])};
  log.feedback = feedback;

  const bool unanimous = std::all_of(confidences.begin(), confidences.end(),
                                     [](const StepConfidence& c) { return c.normalized == 1.0; });
  if (config_.early_exit && unanimous &&
      sub_answers_equivalent(feedback.revised_answer, feedback.original_answer, task.kind)) {
    log.early_exit = true;
    return;
  }
  const auto refined = refine_with_feedback(task, trace, answer, d, feedback, log, base);
  log.trace = refined.trace;
  log.answer = refined.answer;
}

Transcript Engine::run(const Task& task, std::uint64_t seed, int repeat, int slot,
                       std::uint64_t salt) {
  std::set<std::string> seen;
  t_seen_keys = &seen;
  struct Reset {
    ~Reset() { t_seen_keys = nullptr; }
  } reset;

  Transcript tr;
  tr.task_id = task.id;
  tr.question = task.question;
  tr.ground_truth = task.ground_truth;
  tr.answer_kind = task.kind;
  tr.method = config_.method;
  tr.seed = seed;
  tr.repeat = repeat;
  tr.slot = slot;
  tr.config = engine_config_to_json(config_);

  // Reply errors stay local to the iteration; anything else ends the run.
  const auto fail = [&](IterationRecord& rec, const Error& e) {
    rec.error = e.what();
    if (!is_reply_error(e)) {
      tr.error = e.what();
      tr.aborted = true;
    }
  };

  {
    IterationRecord rec;
    try {
      const auto cot = generate_cot(task, rec, sample_index_for(salt, 0, 0));
      rec.trace = cot.trace;
      rec.answer = cot.answer;
    } catch (const Error& e) {
      fail(rec, e);
      tr.error = e.what();
    }
    tr.iterations.push_back(std::move(rec));
  }

  const bool cot_failed = tr.iterations.front().error.has_value();
  if (!cot_failed && config_.method == Method::SsrPlan) {
    const auto& prev = tr.iterations.back();
    IterationRecord rec;
    rec.route = Route::Plan;
    rec.trace = prev.trace;
    rec.answer = prev.answer;
    try {
      auto plan = plan_refine(task, prev.trace, prev.answer, rec, sample_index_for(salt, 0, 0));
      rec.decomposition = std::move(plan.plan);
      rec.judge_text = std::move(plan.judgement);
      rec.plan_changed = plan.changed;
      rec.trace = std::move(plan.output.trace);
      rec.answer = std::move(plan.output.answer);
    } catch (const Error& e) {
      fail(rec, e);
    }
    tr.iterations.push_back(std::move(rec));
  }

  const int K = config_.method == Method::CoT ? 0 : config_.K;
  for (int k = 1; k <= K && !cot_failed && !tr.aborted; ++k) {
    const std::string trace = tr.iterations.back().trace;
    const std::string answer = tr.iterations.back().answer;
    IterationRecord rec;
    rec.k = k;
    rec.trace = trace;
    rec.answer = answer;
    const auto base = sample_index_for(salt, k, 0);
    try {
      switch (config_.method) {
        case Method::CoT:
          break;
        case Method::SelfRefine: {
          rec.route = Route::SelfRefine;
          auto round = self_refine_round(task, trace, answer, false, rec, base);
          rec.judge_score = round.score;
          rec.judge_text = std::move(round.judge_text);
          rec.trace = std::move(round.refined->trace);
          rec.answer = std::move(round.refined->answer);
          break;
        }
        case Method::SsrLin:
          rec.route = Route::Socratic;
          socratic_pass(task, trace, answer, rec, base);
          break;
        case Method::SsrAda:
        case Method::SsrPlan: {
          auto round = self_refine_round(task, trace, answer, true, rec, base);
          rec.judge_score = round.score;
          rec.judge_text = std::move(round.judge_text);
          if (round.score < 5) {
            rec.route = Route::SelfRefine;
            rec.trace = std::move(round.refined->trace);
            rec.answer = std::move(round.refined->answer);
          } else {
            rec.route = Route::Socratic;
            socratic_pass(task, trace, answer, rec, base);
          }
          break;
        }
      }
    } catch (const Error& e) {
      fail(rec, e);
      // A failed pass leaves the state where it was.
      rec.trace = trace;
      rec.answer = answer;
    }
    tr.iterations.push_back(std::move(rec));
  }

  if (config_.final_self_eval && !cot_failed && !tr.aborted) {
    IterationRecord log;
    try {
      const auto& last = tr.iterations.back();
      const auto prompt = render(PromptKind::Verification, task.domain(),
                                 {{"question", task.question}, {"response", last.trace}});
      std::uint32_t attempt = 0;
      tr.final_score = std::max(
          0, ask(PromptKind::Verification, prompt, sample_index_for(salt, kFinalEvalIteration, 0),
                 log, [](const std::string& text) { return parse_score(text); }, attempt));
    } catch (const Error& e) {
      if (!is_reply_error(e)) {
        tr.error = e.what();
        tr.aborted = true;
      }
    }
    tr.final_calls = std::move(log.calls);
  }

  const auto add = [&tr](const std::vector<CallRecord>& calls) {
    for (const auto& c : calls) {
      ++tr.totals.calls;
      tr.totals.cache_hits += c.cache_hit ? 1 : 0;
      tr.totals.prompt_tokens += c.prompt_tokens;
      tr.totals.completion_tokens += c.completion_tokens;
    }
  };
  for (const auto& rec : tr.iterations) add(rec.calls);
  add(tr.final_calls);
  return tr;
}

}  // namespace ssr
