#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "ssr/commands.hpp"
#include "ssr/transcript.hpp"
#include "support.hpp"

using namespace ssr;
using namespace ssr::testing;
using nlohmann::json;

namespace {

struct Shell {
  int status = 0;
  std::string output;
};

// Runs the ssr binary with stdout and stderr captured to a file.
Shell ssr_cli(const std::string& args, const TempDir& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string("\"") + SSR_CLI_PATH + "\" " + args + " > \"" + log.string() +
                          "\" 2>&1";
  Shell out;
  out.status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  out.output = ss.str();
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

// A mock that walks every prompt family of the refinement methods.
const json kMockScript = {
    {"rules",
     json::array({
         {{"match", "determine the confidence of the prediction"}, {"responses", {"<answer>4</answer>"}}},
         {{"match", "address the specific issue identified"},
          {"responses", {"<evaluation>Checked.</evaluation> <answer>10</answer>"}}},
         {{"match", "Continue the reasoning step by step from this point"},
          {"responses", {"<answer>10</answer>"}}},
         {{"match", "meticulously addressing the judge's feedback"},
          {"responses", {"Refined. <answer>10</answer>"}}},
         {{"match", "act as an impartial judge"}, {"responses", {"<answer>3</answer>", "<answer>5</answer>"}}},
         {{"match", "reasoning process into a series of"},
          {"responses",
           {"```json\n{\"sub-questions\": [{\"description\": \"What is 2 + 3?\", \"answer\": 5}, "
            "{\"description\": \"What is 5 doubled?\", \"answer\": 10}], \"answer\": 10}\n```"}}},
         {{"match", "What is 2 \\+ 3\\?$"}, {"regex", true}, {"responses", {"<answer>5</answer>", "<answer>6</answer>"}}},
         {{"match", "answer the next sub-question"}, {"responses", {"<answer>10</answer>"}}},
         {{"match", "Solve the given math problem"}, {"responses", {"2 + 3 = 5, doubled is 10. <answer>10</answer>"}}},
     })}};

const std::string kTasks =
    R"({"id":"m1","question":"Add 2 and 3, then double it.","answer":"10","kind":"numeric"})"
    "\n"
    R"({"id":"m2","question":"Add 3 and 2, then double it.","answer":"10","kind":"numeric"})"
    "\n";

struct MockFiles {
  TempDir dir;
  std::filesystem::path script = dir / "mock.json";
  std::filesystem::path tasks = dir / "tasks.jsonl";
  MockFiles() {
    write_file(script, kMockScript.dump(2));
    write_file(tasks, kTasks);
  }
};

RunConfig chain_config(const std::filesystem::path& out, int count, Method method, int K) {
  RunConfig c;
  c.engine.method = method;
  c.engine.K = K;
  c.engine.M = 5;
  c.backend.kind = "chain-sim";
  c.dataset.generator = "arith-chain";
  c.dataset.count = count;
  c.output_dir = out;
  c.seed = 3;
  return c;
}

// P[the vote over n exchangeable voters is right] when all wrong answers
// coincide and a tie goes to whichever side voted first.
double vote_oracle(int n, double p) {
  double acc = 0.0;
  for (int x = 0; x <= n; ++x) {
    const double w = oracle::binomial_pmf(n, x, p);
    if (2 * x > n) acc += w;
    else if (2 * x == n) acc += w * 0.5;
  }
  return acc;
}

}  // namespace

TEST_CASE("run on two mock tasks writes two records and a summary") {
  MockFiles f;
  const auto out = f.dir / "run";
  const auto r = ssr_cli("run --method ssr-ada --iterations 3 --samples-per-step 5 --backend mock "
                         "--mock-script " + q(f.script) + " --tasks " + q(f.tasks) + " -o " + q(out),
                         f.dir);
  CHECK(r.status == 0);
  CHECK(r.output.find("LR-Acc") != std::string::npos);
  const auto transcripts = load_transcripts(out / "transcripts.jsonl");
  REQUIRE(transcripts.size() == 2);
  CHECK(transcripts[0].task_id == "m1");
  CHECK(transcripts[1].task_id == "m2");
  CHECK(transcripts[0].iterations.size() == 4);
  CHECK(transcripts[0].final_answer() == "10");
  const auto summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary["records"] == 2);
  CHECK(summary["live_calls"].get<int>() > 0);
}

TEST_CASE("a live backend without its key fails before any work") {
  TempDir dir;
  ::unsetenv("SSR_TEST_ABSENT_KEY");
  const auto r = ssr_cli("run --backend openai --api-key-env SSR_TEST_ABSENT_KEY --gen arith-chain "
                         "--count 1 -o " + q(dir / "run"),
                         dir);
  CHECK(r.status != 0);
  CHECK(r.output.find("SSR_TEST_ABSENT_KEY") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "run" / "transcripts.jsonl"));
}

TEST_CASE("a warm cache replays the run without live calls") {
  MockFiles f;
  const std::string common = "run --method ssr-lin -K 2 -M 3 -N 2 --backend mock --mock-script " +
                             q(f.script) + " --tasks " + q(f.tasks) + " --workers 3";
  REQUIRE(ssr_cli(common + " -o " + q(f.dir / "a"), f.dir).status == 0);
  REQUIRE(ssr_cli(common + " -o " + q(f.dir / "b") + " --cache-dir " + q(f.dir / "a" / "cache"), f.dir)
              .status == 0);
  CHECK(slurp(f.dir / "a" / "transcripts.jsonl") == slurp(f.dir / "b" / "transcripts.jsonl"));
  CHECK(json::parse(slurp(f.dir / "a" / "summary.json"))["live_calls"].get<int>() > 0);
  CHECK(json::parse(slurp(f.dir / "b" / "summary.json"))["live_calls"] == 0);
}

TEST_CASE("config file with flag overrides") {
  MockFiles f;
  const json config = {{"method", "ssr-lin"},
                       {"K", 2},
                       {"M", 3},
                       {"backend", {{"kind", "mock"}, {"mock_script", f.script.string()}}},
                       {"dataset", {{"path", f.tasks.string()}}}};
  write_file(f.dir / "config.json", config.dump());
  const auto out = f.dir / "run";
  REQUIRE(ssr_cli("run --config " + q(f.dir / "config.json") + " -K 1 -o " + q(out), f.dir).status == 0);
  const auto transcripts = load_transcripts(out / "transcripts.jsonl");
  REQUIRE(transcripts.size() == 2);
  CHECK(transcripts[0].config["K"] == 1);
  CHECK(transcripts[0].config["M"] == 3);
  CHECK(transcripts[0].iterations.size() == 2);

  auto typo = config;
  typo["samples_per_stp"] = 4;
  write_file(f.dir / "typo.json", typo.dump());
  const auto bad = ssr_cli("run --config " + q(f.dir / "typo.json") + " -o " + q(f.dir / "x"), f.dir);
  CHECK(bad.status != 0);
  CHECK(bad.output.find("samples_per_stp") != std::string::npos);
  CHECK_THROWS_AS(run_config_from_json(typo), Error);
}

TEST_CASE("report: pass at K never trails last-round accuracy") {
  TempDir dir;
  std::ostringstream log;
  auto config = chain_config(dir / "run", 40, Method::SsrLin, 2);
  const auto summary = cmd_run(config, log);
  CHECK(summary.records == 40);

  ReportOptions options;
  options.transcripts = {summary.transcripts};
  options.metrics = {"lr-acc", "pass-at-k"};
  options.output_dir = dir / "report";
  std::ostringstream out;
  const auto doc = cmd_report(options, out);
  REQUIRE(doc.contains("lr-acc"));
  REQUIRE(doc.contains("pass-at-k"));
  CHECK(doc["pass-at-k"]["mean"].get<double>() >= doc["lr-acc"]["mean"].get<double>());
  CHECK(doc["lr-acc"]["mean"].get<double>() == summary.lr_acc.mean);
  CHECK(std::filesystem::exists(dir / "report" / "report.json"));
  CHECK(std::filesystem::exists(dir / "report" / "report.csv"));

  const auto cli = ssr_cli("report --metrics lr-acc,pass-at-k " + q(summary.transcripts), dir);
  CHECK(cli.status == 0);
  CHECK(cli.output.find("pass-at-k") != std::string::npos);
}

TEST_CASE("report refuses an empty transcript set") {
  TempDir dir;
  write_file(dir / "empty.jsonl", "");
  ReportOptions options;
  options.transcripts = {dir / "empty.jsonl"};
  std::ostringstream out;
  CHECK_THROWS_AS(cmd_report(options, out), Error);
  CHECK(ssr_cli("report " + q(dir / "empty.jsonl"), dir).status != 0);
  CHECK_FALSE(std::filesystem::exists(dir / "report.json"));
}

TEST_CASE("report refuses a newer transcript schema") {
  TempDir dir;
  MockFiles f;
  REQUIRE(ssr_cli("run --method cot --backend mock --mock-script " + q(f.script) + " --tasks " +
                      q(f.tasks) + " -o " + q(dir / "run"),
                  dir)
              .status == 0);
  auto line = json::parse(slurp(dir / "run" / "transcripts.jsonl").substr(0, slurp(dir / "run" / "transcripts.jsonl").find('\n')));
  line["schema_version"] = "9.0";
  write_file(dir / "future.jsonl", line.dump() + "\n");
  ReportOptions options;
  options.transcripts = {dir / "future.jsonl"};
  std::ostringstream out;
  try {
    cmd_report(options, out);
    FAIL("expected a schema error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaVersionMismatch);
  }
}

TEST_CASE("judge-eval reports every aggregation") {
  TempDir dir;
  std::ostringstream log;
  auto config = chain_config(dir / "run", 60, Method::SsrAda, 2);
  config.backend.chain_sim.error_rate = 0.4;
  const auto summary = cmd_run(config, log);
  JudgeEvalOptions options;
  options.transcripts = {summary.transcripts};
  options.output_dir = dir / "je";
  std::ostringstream out;
  const auto doc = cmd_judge_eval(options, out);
  for (const char* signal : {"step-min", "step-mean", "step-mean-log"}) {
    CAPTURE(signal);
    REQUIRE(doc.contains(signal));
    const double auroc = doc[signal]["auroc"].get<double>();
    CHECK(auroc >= 0.0);
    CHECK(auroc <= 1.0);
    CHECK(doc[signal].contains("precision_star"));
    CHECK(doc[signal].contains("recall_star"));
  }
  CHECK(std::filesystem::exists(dir / "je" / "judge_eval.json"));
}

TEST_CASE("parallel scaling tracks the vote oracle") {
  TempDir dir;
  std::ostringstream log;
  auto config = chain_config(dir / "scale", 200, Method::CoT, 0);
  const double p = 1.0 - config.backend.chain_sim.error_rate;
  ScaleOptions options;
  options.axis = ScaleAxis::Parallel;
  options.budgets = {1, 2, 4};
  const auto rows = cmd_scale(config, options, log);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CAPTURE(rows[i].budget);
    const double expected = vote_oracle(rows[i].budget, p);
    const double sd = std::sqrt(expected * (1 - expected) / 200.0);
    CHECK(std::abs(rows[i].accuracy - expected) < 4 * sd);
    if (i) CHECK(rows[i].accuracy >= rows[i - 1].accuracy);
  }
  const auto csv = slurp(dir / "scale" / "scaling.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("sequential scaling starts at plain CoT") {
  TempDir dir;
  std::ostringstream log;
  ScaleOptions options;
  options.axis = ScaleAxis::Sequential;
  options.budgets = {0, 1};
  const auto rows = cmd_scale(chain_config(dir / "scale", 60, Method::SsrLin, 1), options, log);
  REQUIRE(rows.size() == 2);
  const auto cot = cmd_run(chain_config(dir / "cot", 60, Method::CoT, 0), log);
  CHECK(rows[0].accuracy == cot.lr_acc.mean);

  const auto r = ssr_cli("scale --backend chain-sim --gen arith-chain --count 2 --axis parallel "
                         "--budgets 4,2 -o " + q(dir / "bad"),
                         dir);
  CHECK(r.status != 0);
  ScaleOptions descending;
  descending.budgets = {4, 2};
  CHECK_THROWS_AS(cmd_scale(chain_config(dir / "bad2", 2, Method::SsrLin, 4), descending, log), Error);
}

TEST_CASE("gen: sudoku sets are verifier-consistent and reproducible") {
  TempDir dir;
  const std::string args = "gen --kind mini-sudoku --count 5 --seed 1 -o ";
  REQUIRE(ssr_cli(args + q(dir / "a.jsonl"), dir).status == 0);
  REQUIRE(ssr_cli(args + q(dir / "b.jsonl"), dir).status == 0);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  const auto tasks = load_jsonl(dir / "a.jsonl");
  REQUIRE(tasks.size() == 5);
  for (const auto& t : tasks) {
    const auto shown = oracle::grid_in_text(t.question);
    REQUIRE(shown);
    const auto completions = oracle::sudoku_completions(*shown);
    REQUIRE(completions.size() == 1);
    std::string text;
    for (const auto& row : completions[0])
      for (int v : row) text += std::to_string(v) + " ";
    CHECK(is_correct(t, text));
    CHECK(t.meta.contains("seed"));
  }
}

TEST_CASE("gen: zebra puzzles are oracle-unique") {
  TempDir dir;
  REQUIRE(ssr_cli("gen --kind zebra --entities 3 --attributes 3 --count 4 -o " + q(dir / "z.jsonl"), dir)
              .status == 0);
  const auto tasks = load_jsonl(dir / "z.jsonl");
  REQUIRE(tasks.size() == 4);
  for (const auto& t : tasks) {
    const auto parsed = oracle::parse_zebra(t.question);
    REQUIRE(parsed);
    const auto models = oracle::zebra_models(*parsed);
    REQUIRE(models.size() == 1);
    CHECK(parsed->values[parsed->asked_attr][models[0][parsed->asked_attr][parsed->asked_house]] ==
          t.ground_truth);
  }
}
