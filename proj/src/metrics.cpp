#include "ssr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "ssr/error.hpp"
#include "ssr/prompts.hpp"
#include "ssr/taskgen.hpp"
#include "ssr/verify.hpp"

namespace ssr {

MetricValue summarize(std::span<const double> xs) {
  MetricValue v;
  v.n = xs.size();
  if (xs.empty()) return v;
  v.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - v.mean) * (x - v.mean);
    v.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return v;
}

RunSet::RunSet(std::vector<Transcript> transcripts) : transcripts_(std::move(transcripts)) {
  for (std::size_t i = 0; i < transcripts_.size(); ++i) {
    const auto& t = transcripts_[i];
    if (std::find(tasks_.begin(), tasks_.end(), t.task_id) == tasks_.end())
      tasks_.push_back(t.task_id);
    index_[t.repeat][t.task_id][t.slot] = i;
  }
}

std::vector<int> RunSet::repeats() const {
  std::vector<int> out;
  for (const auto& [r, _] : index_) out.push_back(r);
  return out;
}

std::vector<const Transcript*> RunSet::slots(int repeat, const std::string& task) const {
  std::vector<const Transcript*> out;
  const auto r = index_.find(repeat);
  if (r == index_.end()) return out;
  const auto t = r->second.find(task);
  if (t == r->second.end()) return out;
  for (const auto& [_, i] : t->second) out.push_back(&transcripts_[i]);
  return out;
}

std::size_t RunSet::width() const {
  std::size_t w = 0;
  bool first = true;
  for (const auto& [_, tasks] : index_)
    for (const auto& [__, slots] : tasks) {
      w = first ? slots.size() : std::min(w, slots.size());
      first = false;
    }
  return w;
}

bool answer_correct(const Transcript& t, std::string_view answer) {
  Task task;
  task.ground_truth = t.ground_truth;
  task.kind = t.answer_kind;
  return is_correct(task, answer);
}

namespace {

// Per-repeat mean of f over every (task, slot) transcript.
template <class F>
MetricValue per_run(const RunSet& runs, F f, std::optional<int> slot = std::nullopt) {
  std::vector<double> per_repeat;
  for (int r : runs.repeats()) {
    double hits = 0;
    std::size_t n = 0;
    for (const auto& task : runs.tasks())
      for (const auto* t : runs.slots(r, task)) {
        if (slot && t->slot != *slot) continue;
        hits += f(*t) ? 1.0 : 0.0;
        ++n;
      }
    if (n > 0) per_repeat.push_back(hits / static_cast<double>(n));
  }
  return summarize(per_repeat);
}

bool vote_correct(std::span<const Transcript* const> group, ParallelAggregation aggregation) {
  const auto kind = group.front()->answer_kind;
  std::vector<std::string> answers;
  std::vector<ScoredAnswer> scored;
  for (const auto* t : group) {
    answers.push_back(t->final_answer());
    scored.push_back({t->final_answer(), static_cast<double>(t->final_score.value_or(0))});
  }
  const std::string pick = aggregation == ParallelAggregation::WBoN
                               ? weighted_best_of_n(scored, kind)
                               : majority_answer(answers, kind).answer;
  return answer_correct(*group.front(), pick);
}

std::int64_t tokens_of(const std::vector<CallRecord>& calls) {
  std::int64_t n = 0;
  for (const auto& c : calls) n += c.prompt_tokens + c.completion_tokens;
  return n;
}

// The state after `budget` iterations: the last record with k <= budget.
const IterationRecord* state_at(const Transcript& t, int budget, std::int64_t& tokens) {
  const IterationRecord* state = nullptr;
  tokens = 0;
  for (const auto& rec : t.iterations) {
    if (rec.k > budget) break;
    state = &rec;
    tokens += tokens_of(rec.calls);
  }
  return state;
}

int configured_k(const Transcript& t) {
  if (t.method == Method::CoT) return 0;
  return t.config.value("K", 0);
}

}  // namespace

MetricValue lr_acc(const RunSet& runs, std::optional<int> slot) {
  return per_run(runs, [](const Transcript& t) { return answer_correct(t, t.final_answer()); }, slot);
}

MetricValue lr_maj_at_k(const RunSet& runs, int k, MajGrouping grouping) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k", "must be >= 1");
  std::vector<double> per_repeat;
  for (int r : runs.repeats()) {
    double hits = 0;
    std::size_t votes = 0;
    for (const auto& task : runs.tasks()) {
      const auto slots = runs.slots(r, task);
      if (slots.empty()) continue;
      if (static_cast<int>(slots.size()) < k)
        throw Error(ErrorCode::InsufficientParallelism,
                    "k=" + std::to_string(k) + " N=" + std::to_string(slots.size()));
      const std::size_t groups = grouping == MajGrouping::FirstK ? 1 : slots.size() / k;
      for (std::size_t g = 0; g < groups; ++g) {
        std::span<const Transcript* const> group(slots.data() + g * k, static_cast<std::size_t>(k));
        hits += vote_correct(group, ParallelAggregation::MajN) ? 1.0 : 0.0;
        ++votes;
      }
    }
    if (votes > 0) per_repeat.push_back(hits / static_cast<double>(votes));
  }
  return summarize(per_repeat);
}

MetricValue pass_at_k(const RunSet& runs) {
  return per_run(runs, [](const Transcript& t) {
    return std::any_of(t.iterations.begin(), t.iterations.end(),
                       [&t](const IterationRecord& rec) { return answer_correct(t, rec.answer); });
  });
}

MetricValue bok_acc(const RunSet& runs, Gateway& judge, const SamplingProfile& sampling,
                    const std::string& model_id, int parallelism) {
  const auto& all = runs.transcripts();
  std::vector<std::string> prompts;
  std::vector<ChatRequest> requests;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& t = all[i];
    std::ostringstream solutions;
    for (std::size_t j = 0; j < t.iterations.size(); ++j) {
      if (j) solutions << "\n\n";
      solutions << "Solution " << j + 1 << ":\n" << t.iterations[j].trace;
    }
    const auto domain = t.answer_kind == AnswerKind::Numeric ? TaskDomain::Math : TaskDomain::Logic;
    prompts.push_back(render(PromptKind::Ensemble, domain,
                             {{"question", t.question}, {"solutions", solutions.str()}}));
    auto req = ChatRequest::user(prompts.back());
    req.temperature = sampling.temperature;
    req.max_tokens = sampling.max_tokens;
    req.model_id = model_id;
    req.sample_index = i;
    requests.push_back(std::move(req));
  }
  const auto responses = judge.complete_many(requests, parallelism);

  std::vector<bool> correct(all.size(), false);
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto pick = find_tag(responses[i].text, "answer");
    if (!pick) {
      auto again = requests[i];
      again.attempt = 1;
      pick = find_tag(judge.complete(again).text, "answer");
    }
    correct[i] = pick && answer_correct(all[i], *pick);
  }
  return per_run(runs, [&](const Transcript& t) {
    return correct[static_cast<std::size_t>(&t - all.data())];
  });
}

std::string_view to_string(Aggregation mode) {
  switch (mode) {
    case Aggregation::Min: return "min";
    case Aggregation::Mean: return "mean";
    case Aggregation::MeanLog: return "mean-log";
  }
  return "min";
}

Aggregation aggregation_from_string(std::string_view name) {
  for (auto mode : {Aggregation::Min, Aggregation::Mean, Aggregation::MeanLog})
    if (to_string(mode) == name) return mode;
  throw Error(ErrorCode::ConfigError, std::string(name), "unknown aggregation");
}

double aggregate_step_scores(std::span<const double> confidences, Aggregation mode, int M) {
  if (confidences.empty()) throw Error(ErrorCode::EmptyConfidences, std::string(to_string(mode)));
  switch (mode) {
    case Aggregation::Min:
      return *std::min_element(confidences.begin(), confidences.end());
    case Aggregation::Mean:
      return std::accumulate(confidences.begin(), confidences.end(), 0.0) /
             static_cast<double>(confidences.size());
    case Aggregation::MeanLog: {
      const double eps = 1.0 / (5.0 * M * 10.0);
      double sum = 0.0;
      for (double c : confidences) sum += std::log(std::max(c, eps));
      return sum / static_cast<double>(confidences.size());
    }
  }
  return 0.0;
}

JudgeQuality judge_quality(std::span<const JudgeSample> samples, ThresholdRule rule) {
  std::size_t positives = 0;
  for (const auto& s : samples) positives += s.is_incorrect ? 1 : 0;
  const std::size_t negatives = samples.size() - positives;
  if (positives == 0 || negatives == 0)
    throw Error(ErrorCode::DegenerateLabels,
                "positives=" + std::to_string(positives) + " negatives=" + std::to_string(negatives));

  // Mann-Whitney statistic by sorting: a positive "wins" against every
  // negative scored higher, and half-wins against ties.
  std::vector<std::pair<double, bool>> sorted;
  for (const auto& s : samples) sorted.emplace_back(s.score, s.is_incorrect);
  std::sort(sorted.begin(), sorted.end());
  double wins = 0.0;
  std::size_t negatives_below = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i, pos = 0, neg = 0;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      (sorted[j].second ? pos : neg) += 1;
      ++j;
    }
    const double negatives_above = static_cast<double>(negatives - negatives_below - neg);
    wins += static_cast<double>(pos) * (negatives_above + 0.5 * static_cast<double>(neg));
    negatives_below += neg;
    i = j;
  }

  JudgeQuality q;
  q.auroc = wins / (static_cast<double>(positives) * static_cast<double>(negatives));

  // Candidate thresholds: every distinct score, ascending; first best wins.
  double best = -1.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      (sorted[j].second ? tp : fp) += 1;
      ++j;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    double objective;
    if (rule == ThresholdRule::F1) {
      objective = tp == 0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    } else {
      objective = recall - static_cast<double>(fp) / static_cast<double>(negatives);
    }
    if (objective > best) {
      best = objective;
      q.precision_star = precision;
      q.recall_star = recall;
      q.threshold_star = sorted[i].first;
    }
    i = j;
  }
  return q;
}

std::vector<JudgeSample> judge_samples(const RunSet& runs, JudgeSignal signal, Aggregation mode) {
  std::vector<JudgeSample> out;
  for (const auto& t : runs.transcripts()) {
    const int M = t.config.value("M", 5);
    for (std::size_t i = 1; i < t.iterations.size(); ++i) {
      const auto& rec = t.iterations[i];
      if (rec.error) continue;
      std::optional<double> score;
      if (signal == JudgeSignal::StepConfidence && rec.confidences && !rec.confidences->empty()) {
        std::vector<double> normalized;
        for (const auto& c : *rec.confidences) normalized.push_back(c.normalized);
        score = aggregate_step_scores(normalized, mode, M);
      } else if (signal == JudgeSignal::Verification && rec.judge_score) {
        score = static_cast<double>(*rec.judge_score);
      }
      if (score) out.push_back({*score, !answer_correct(t, t.iterations[i - 1].answer)});
    }
  }
  return out;
}

namespace {

double mean_tokens(const RunSet& runs, const std::function<std::int64_t(const Transcript&)>& f) {
  std::set<std::pair<int, std::string>> units;
  std::int64_t total = 0;
  for (const auto& t : runs.transcripts()) {
    units.emplace(t.repeat, t.task_id);
    total += f(t);
  }
  return units.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(units.size());
}

ScalingRow parallel_row(const RunSet& runs, int n, ParallelAggregation aggregation) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "budget", "parallel width must be >= 1");
  std::vector<double> per_repeat;
  std::int64_t tokens = 0;
  std::size_t units = 0;
  for (int r : runs.repeats()) {
    double hits = 0;
    std::size_t tasks = 0;
    for (const auto& task : runs.tasks()) {
      auto slots = runs.slots(r, task);
      if (slots.empty()) continue;
      if (static_cast<int>(slots.size()) < n)
        throw Error(ErrorCode::MissingBudget, "N=" + std::to_string(n),
                    "only " + std::to_string(slots.size()) + " slots recorded");
      slots.resize(n);
      hits += vote_correct(slots, aggregation) ? 1.0 : 0.0;
      for (const auto* t : slots) tokens += t->totals.prompt_tokens + t->totals.completion_tokens;
      ++tasks;
      ++units;
    }
    if (tasks > 0) per_repeat.push_back(hits / static_cast<double>(tasks));
  }
  const auto v = summarize(per_repeat);
  return {n, v.mean, v.std, units ? static_cast<double>(tokens) / static_cast<double>(units) : 0.0};
}

}  // namespace

std::vector<ScalingRow> scaling_series(const std::map<int, RunSet>& by_budget,
                                       std::span<const int> budgets, ScaleAxis axis,
                                       ParallelAggregation aggregation) {
  std::vector<ScalingRow> rows;
  for (int b : budgets) {
    const auto it = by_budget.find(b);
    if (it == by_budget.end() || it->second.empty())
      throw Error(ErrorCode::MissingBudget, std::to_string(b), "no run set for this budget");
    const auto& runs = it->second;
    if (axis == ScaleAxis::Parallel) {
      rows.push_back(parallel_row(runs, b, aggregation));
    } else {
      const auto v = lr_acc(runs);
      rows.push_back({b, v.mean, v.std, mean_tokens(runs, [](const Transcript& t) {
                        return t.totals.prompt_tokens + t.totals.completion_tokens;
                      })});
    }
  }
  return rows;
}

std::vector<ScalingRow> sequential_from_run(const RunSet& runs, std::span<const int> budgets) {
  std::vector<ScalingRow> rows;
  for (int b : budgets) {
    for (const auto& t : runs.transcripts())
      if (b < 0 || b > configured_k(t))
        throw Error(ErrorCode::MissingBudget, std::to_string(b), "beyond the recorded iterations");
    const auto v = per_run(runs, [b](const Transcript& t) {
      std::int64_t tokens = 0;
      const auto* state = state_at(t, b, tokens);
      return state && answer_correct(t, state->answer);
    });
    rows.push_back({b, v.mean, v.std, mean_tokens(runs, [b](const Transcript& t) {
                      std::int64_t tokens = 0;
                      state_at(t, b, tokens);
                      return tokens;
                    })});
  }
  return rows;
}

std::vector<ScalingRow> parallel_from_run(const RunSet& runs, std::span<const int> budgets,
                                          ParallelAggregation aggregation) {
  std::vector<ScalingRow> rows;
  for (int b : budgets) rows.push_back(parallel_row(runs, b, aggregation));
  return rows;
}

std::string scaling_csv(std::span<const ScalingRow> rows) {
  std::ostringstream out;
  out << "budget,accuracy,std,est_tokens\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.budget << ',' << r.accuracy << ',' << r.std << ',' << r.est_tokens << '\n';
  return out.str();
}

}  // namespace ssr
