#include "ssr/commands.hpp"

#include <atomic>
#include <condition_variable>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "ssr/error.hpp"
#include "ssr/transcript.hpp"

namespace ssr {

using nlohmann::json;

namespace {

// (repeat, task, slot) in the order transcripts are written.
struct Unit {
  int repeat;
  std::size_t task;
  int slot;
};

std::uint64_t salt_for(int repeat, int slot) {
  return (static_cast<std::uint64_t>(repeat) << 10) | static_cast<std::uint64_t>(slot);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, path.string(), "cannot write");
  out << text;
}

std::string fixed(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

}  // namespace

RunSummary run_tasks(const RunConfig& config, const std::vector<Task>& tasks, std::ostream& log) {
  auto gateway = std::make_unique<Gateway>(make_backend(config.backend, config.seed),
                                           gateway_config(config));
  Engine engine(*gateway, config.engine);
  const auto snapshot = run_config_snapshot(config);

  std::vector<Unit> units;
  for (int r = 0; r < config.repeats; ++r)
    for (std::size_t t = 0; t < tasks.size(); ++t)
      for (int s = 0; s < config.parallel; ++s) units.push_back({r, t, s});

  RunSummary summary;
  summary.transcripts = config.output_dir / "transcripts.jsonl";
  std::filesystem::create_directories(config.output_dir);
  write_text(config.output_dir / "config.json", snapshot.dump(2) + "\n");
  TranscriptWriter writer(summary.transcripts);

  // Workers finish units in any order; the writer releases them in order.
  std::mutex mutex;
  std::condition_variable ready;
  std::map<std::size_t, Transcript> done;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::vector<Transcript> collected;

  std::size_t idle_workers = 0;
  const int width = std::max(1, std::min<int>(config.workers, static_cast<int>(units.size())));

  const auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (stop.load() || i >= units.size()) break;
      const auto& u = units[i];
      Transcript tr = engine.run(tasks[u.task], config.seed, u.repeat, u.slot,
                                 salt_for(u.repeat, u.slot));
      tr.config = snapshot;
      if (tr.aborted) stop.store(true);
      std::lock_guard lock(mutex);
      done.emplace(i, std::move(tr));
      ready.notify_all();
    }
    std::lock_guard lock(mutex);
    ++idle_workers;
    ready.notify_all();
  };

  std::vector<std::jthread> pool;
  for (int w = 0; w < width; ++w) pool.emplace_back(worker);

  for (std::size_t written = 0; written < units.size(); ++written) {
    std::unique_lock lock(mutex);
    ready.wait(lock, [&] {
      return done.count(written) > 0 || idle_workers == static_cast<std::size_t>(width);
    });
    auto it = done.find(written);
    if (it == done.end()) break;  // the run stopped before this unit started
    Transcript tr = std::move(it->second);
    done.erase(it);
    lock.unlock();
    writer.write(tr);
    ++summary.records;
    if (tr.error) {
      ++summary.failed;
      log << "task " << tr.task_id << " (repeat " << tr.repeat << ", slot " << tr.slot
          << "): " << *tr.error << "\n";
    }
    collected.push_back(std::move(tr));
  }
  pool.clear();
  summary.aborted = stop.load();

  summary.lr_acc = lr_acc(RunSet(std::move(collected)));
  summary.usage = gateway->usage();
  json summary_doc = {{"records", summary.records},
                      {"failed", summary.failed},
                      {"aborted", summary.aborted},
                      {"lr_acc", {{"mean", summary.lr_acc.mean}, {"std", summary.lr_acc.std}, {"n", summary.lr_acc.n}}},
                      {"live_calls", summary.usage.backend_calls},
                      {"cached_calls", summary.usage.cached_calls},
                      {"retries", summary.usage.retries},
                      {"live_prompt_tokens", summary.usage.live_prompt_tokens},
                      {"live_completion_tokens", summary.usage.live_completion_tokens}};
  write_text(config.output_dir / "summary.json", summary_doc.dump(2) + "\n");
  log << "records " << summary.records << ", failed " << summary.failed << ", LR-Acc "
      << fixed(summary.lr_acc.mean) << " +/- " << fixed(summary.lr_acc.std) << " (R="
      << summary.lr_acc.n << "), live calls " << summary.usage.backend_calls << ", cached calls "
      << summary.usage.cached_calls << "\n";
  return summary;
}

RunSummary cmd_run(RunConfig config, std::ostream& log) {
  config.finalize();
  const auto tasks = resolve_dataset(config.dataset);
  return run_tasks(config, tasks, log);
}

json cmd_report(const ReportOptions& options, std::ostream& out) {
  const RunSet runs(load_transcripts(options.transcripts));
  if (runs.empty()) throw Error(ErrorCode::InvalidArgument, "transcripts", "no transcripts to report on");

  json report = json::object();
  for (const auto& name : options.metrics) {
    MetricValue v;
    if (name == "lr-acc") {
      v = lr_acc(runs);
    } else if (name == "pass-at-k") {
      v = pass_at_k(runs);
    } else if (name.rfind("lr-maj@", 0) == 0) {
      v = lr_maj_at_k(runs, std::stoi(name.substr(7)), options.grouping);
    } else if (name == "bok-acc") {
      if (!options.judge)
        throw Error(ErrorCode::ConfigError, "bok-acc", "needs a judge backend configuration");
      auto judge_config = *options.judge;
      judge_config.finalize();
      Gateway judge(make_backend(judge_config.backend, judge_config.seed), gateway_config(judge_config));
      v = bok_acc(runs, judge, judge_config.engine.sampling, judge_config.engine.model_id,
                  judge_config.concurrency);
    } else {
      throw Error(ErrorCode::InvalidArgument, name, "unknown metric");
    }
    report[name] = {{"mean", v.mean}, {"std", v.std}, {"n", v.n}};
  }

  out << std::left << std::setw(14) << "metric" << std::setw(10) << "mean" << std::setw(10)
      << "std" << "n\n";
  std::ostringstream csv;
  csv << "metric,mean,std,n\n";
  for (const auto& name : options.metrics) {
    const auto& v = report[name];
    out << std::left << std::setw(14) << name << std::setw(10) << fixed(v["mean"].get<double>())
        << std::setw(10) << fixed(v["std"].get<double>()) << v["n"].get<std::size_t>() << "\n";
    csv << name << ',' << v["mean"].get<double>() << ',' << v["std"].get<double>() << ','
        << v["n"].get<std::size_t>() << "\n";
  }
  if (options.output_dir) {
    write_text(*options.output_dir / "report.json", report.dump(2) + "\n");
    write_text(*options.output_dir / "report.csv", csv.str());
  }
  return report;
}

json cmd_judge_eval(const JudgeEvalOptions& options, std::ostream& out) {
  const RunSet runs(load_transcripts(options.transcripts));
  if (runs.empty()) throw Error(ErrorCode::InvalidArgument, "transcripts", "no transcripts to evaluate");

  json report = json::object();
  const auto evaluate = [&](const std::string& name, const std::vector<JudgeSample>& samples) {
    json entry = {{"samples", samples.size()}};
    try {
      const auto q = judge_quality(samples, options.rule);
      entry["auroc"] = q.auroc;
      entry["precision_star"] = q.precision_star;
      entry["recall_star"] = q.recall_star;
      entry["threshold_star"] = q.threshold_star;
    } catch (const Error& e) {
      entry["error"] = e.what();
    }
    report[name] = std::move(entry);
  };
  for (auto mode : {Aggregation::Min, Aggregation::Mean, Aggregation::MeanLog})
    evaluate("step-" + std::string(to_string(mode)),
             judge_samples(runs, JudgeSignal::StepConfidence, mode));
  evaluate("verification", judge_samples(runs, JudgeSignal::Verification));

  out << std::left << std::setw(16) << "signal" << std::setw(9) << "n" << std::setw(9) << "AUROC"
      << std::setw(12) << "precision*" << std::setw(10) << "recall*" << "threshold*\n";
  for (const auto& [name, entry] : report.items()) {
    out << std::left << std::setw(16) << name << std::setw(9) << entry["samples"].get<std::size_t>();
    if (entry.contains("error")) {
      out << entry["error"].get<std::string>() << "\n";
      continue;
    }
    out << std::setw(9) << fixed(entry["auroc"].get<double>()) << std::setw(12)
        << fixed(entry["precision_star"].get<double>()) << std::setw(10)
        << fixed(entry["recall_star"].get<double>()) << fixed(entry["threshold_star"].get<double>())
        << "\n";
  }
  if (options.output_dir) write_text(*options.output_dir / "judge_eval.json", report.dump(2) + "\n");
  return report;
}

std::vector<ScalingRow> cmd_scale(RunConfig config, const ScaleOptions& options, std::ostream& log) {
  if (options.budgets.empty()) throw Error(ErrorCode::InvalidArgument, "budgets", "none given");
  for (std::size_t i = 1; i < options.budgets.size(); ++i)
    if (options.budgets[i] <= options.budgets[i - 1])
      throw Error(ErrorCode::InvalidArgument, "budgets", "must be strictly ascending");
  for (int b : options.budgets)
    if (b < (options.axis == ScaleAxis::Parallel ? 1 : 0))
      throw Error(ErrorCode::InvalidArgument, std::to_string(b), "budget out of range");

  if (options.aggregation == ParallelAggregation::WBoN) config.engine.final_self_eval = true;
  config.finalize();
  const auto tasks = resolve_dataset(config.dataset);
  const auto root = config.output_dir;
  const auto cache = config.cache_dir.value_or(root / "cache");

  std::map<int, RunSet> by_budget;
  for (int b : options.budgets) {
    RunConfig step = config;
    if (options.axis == ScaleAxis::Sequential) {
      step.engine.K = b;
    } else {
      step.parallel = b;
    }
    step.output_dir = root / ("budget-" + std::to_string(b));
    step.cache_dir = cache;
    step.finalize();
    log << "budget " << b << ": ";
    const auto summary = run_tasks(step, tasks, log);
    by_budget.emplace(b, RunSet(load_transcripts(summary.transcripts)));
    if (summary.aborted) throw Error(ErrorCode::BackendUnavailable, "budget " + std::to_string(b), "run aborted");
  }
  auto rows = scaling_series(by_budget, options.budgets, options.axis, options.aggregation);
  write_text(root / "scaling.csv", scaling_csv(rows));
  return rows;
}

std::vector<Task> cmd_gen(const DatasetConfig& spec, const std::filesystem::path& out) {
  auto tasks = generate_tasks(spec);
  write_jsonl(tasks, out);
  return tasks;
}

}  // namespace ssr
