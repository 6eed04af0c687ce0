#include "ssr/chain_sim.hpp"

#include <map>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ssr/backends.hpp"
#include "ssr/error.hpp"
#include "ssr/prompts.hpp"
#include "ssr/taskgen.hpp"

namespace ssr {

ChainSimConfig ChainSimConfig::from_json(const nlohmann::json& doc) {
  ChainSimConfig config;
  config.error_step = doc.value("error_step", config.error_step);
  config.error_rate = doc.value("error_rate", config.error_rate);
  config.judge_recall = doc.value("judge_recall", config.judge_recall);
  config.judge_false_alarm = doc.value("judge_false_alarm", config.judge_false_alarm);
  config.seed = doc.value("seed", config.seed);
  return config;
}

ChainSimulator::ChainSimulator(ChainSimConfig config) : config_(config) {}

namespace {

bool contains(std::string_view text, std::string_view phrase) {
  return text.find(phrase) != std::string_view::npos;
}

std::string between(const std::string& text, std::string_view open, std::string_view close) {
  const auto start = text.find(open);
  if (start == std::string::npos) return {};
  const auto from = start + open.size();
  const auto end = text.find(close, from);
  return text.substr(from, end == std::string::npos ? std::string::npos : end - from);
}

std::string op_phrase(const ChainStep& step) {
  switch (step.op) {
    case ChainOp::Add: return "add " + std::to_string(step.operand);
    case ChainOp::Subtract: return "subtract " + std::to_string(step.operand);
    case ChainOp::Multiply: return "multiply by " + std::to_string(step.operand);
  }
  return {};
}

std::string sub_question(std::size_t index, const ChainStep& step) {
  return "Step " + std::to_string(index + 1) + ": What is the value after applying '" +
         op_phrase(step) + "' to the previous value?";
}

std::string trim_copy(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(first, last - first + 1));
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  try {
    std::size_t used = 0;
    const std::string s = trim_copy(text);
    const auto value = std::stoll(s, &used);
    if (used != s.size()) return std::nullopt;
    return value;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// Judged like the exact-match estimate: share of matching references on 0..5.
std::string confidence_reply(const std::string& prompt) {
  const auto prediction = parse_int(between(prompt, "The prediction is:\n", "\n\n"));
  const auto block = between(prompt, "The reference answers are:\n", "\n\nPlease answer");
  static const std::regex re(R"((?:^|\n)\d+\. ([^\n]*))");
  int total = 0, matches = 0;
  for (auto it = std::sregex_iterator(block.begin(), block.end(), re); it != std::sregex_iterator();
       ++it) {
    ++total;
    if (prediction && parse_int((*it)[1].str()) == prediction) ++matches;
  }
  if (total == 0) return "I cannot compare these.\n<answer>-1</answer>";
  const int score = (10 * matches + total) / (2 * total);  // round(5 * matches / total)
  return std::to_string(matches) + " of " + std::to_string(total) +
         " references agree.\n<answer>" + std::to_string(score) + "</answer>";
}

struct Draw {
  const ChainSimConfig& config;
  const ChatRequest& request;
  std::string prompt;

  // Uniform in [0, 1), keyed by everything that distinguishes a sample.
  double unit(std::string_view salt) const {
    std::ostringstream key;
    key << config.seed << '|' << request.sample_index << '|' << request.attempt << '|' << salt
        << '|' << prompt;
    return static_cast<double>(stable_hash64(key.str()) >> 11) * 0x1.0p-53;
  }
};

// Values after each step, with the designated step perturbed when `err`.
std::vector<std::int64_t> run_chain(const ArithChain& chain, std::int64_t from, std::size_t first,
                                    int error_step, bool err) {
  std::vector<std::int64_t> values;
  std::int64_t value = from;
  for (std::size_t i = first; i < chain.steps.size(); ++i) {
    value = apply_step(value, chain.steps[i]);
    if (err && static_cast<int>(i) == error_step) value += 1;
    values.push_back(value);
  }
  return values;
}

std::string render_solution(const ArithChain& chain, std::int64_t start, std::size_t first,
                            const std::vector<std::int64_t>& values, std::string_view lead) {
  std::ostringstream out;
  out << lead;
  if (first == 0) out << "Start with " << start << ".\n";
  for (std::size_t i = 0; i < values.size(); ++i)
    out << "Step " << first + i + 1 << ": " << op_phrase(chain.steps[first + i]) << " gives "
        << values[i] << ".\n";
  const auto final_value = values.empty() ? start : values.back();
  out << "So the final value is " << final_value << ".\n<answer>" << final_value << "</answer>";
  return out.str();
}

// Step values claimed by a natural trace ("Step i: ... gives V.").
std::map<std::size_t, std::int64_t> trace_values(const std::string& trace) {
  static const std::regex re(R"(Step (\d+): [a-z ]+ -?\d+ gives (-?\d+)\.)");
  std::map<std::size_t, std::int64_t> values;
  for (auto it = std::sregex_iterator(trace.begin(), trace.end(), re); it != std::sregex_iterator();
       ++it)
    values[std::stoul((*it)[1].str()) - 1] = std::stoll((*it)[2].str());
  return values;
}

// Step values claimed by a rendered Socratic trajectory.
std::map<std::size_t, std::int64_t> qa_values(const std::string& text) {
  static const std::regex re(R"(Sub-question \d+: Step (\d+):[^\n]*\nAnswer \d+: (-?\d+))");
  std::map<std::size_t, std::int64_t> values;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator();
       ++it)
    values[std::stoul((*it)[1].str()) - 1] = std::stoll((*it)[2].str());
  return values;
}

std::optional<std::size_t> step_of(std::string_view sub_q) {
  static const std::regex re(R"(Step (\d+):)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(sub_q.begin(), sub_q.end(), m, re)) return std::nullopt;
  return std::stoul(m[1].str()) - 1;
}

// Continue the chain from a revised value at `step`, keeping the claimed
// values of earlier steps.
std::string continue_from(const ArithChain& chain, std::size_t step, std::int64_t revised,
                          const std::map<std::size_t, std::int64_t>& claimed,
                          std::string_view lead) {
  std::vector<std::int64_t> values;
  std::int64_t value = chain.start;
  for (std::size_t i = 0; i < chain.steps.size(); ++i) {
    if (i < step) {
      auto it = claimed.find(i);
      value = it != claimed.end() ? it->second : apply_step(value, chain.steps[i]);
    } else if (i == step) {
      value = revised;
    } else {
      value = apply_step(value, chain.steps[i]);
    }
    values.push_back(value);
  }
  return render_solution(chain, chain.start, 0, values, lead);
}

std::string answers_majority(const std::string& text) {
  static const std::regex re(R"(<answer>\s*(-?\d+)\s*</answer>)");
  std::vector<std::string> answers;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator();
       ++it)
    answers.push_back((*it)[1].str());
  if (answers.empty()) return {};
  return majority_answer(answers, AnswerKind::Numeric).answer;
}

}  // namespace

ChatResponse ChainSimulator::send(const ChatRequest& request, int /*retry*/) {
  Draw draw{config_, request, request.prompt_text()};
  const std::string& prompt = draw.prompt;
  if (contains(prompt, "determine the confidence of the prediction")) {
    ChatResponse response;
    response.text = confidence_reply(prompt);
    response.prompt_tokens = count_words(prompt);
    response.completion_tokens = count_words(response.text);
    response.backend_id = id();
    return response;
  }
  const auto chain = parse_chain_question(prompt);
  if (!chain) throw Error(ErrorCode::BackendUnavailable, "chain-sim", "prompt carries no chain question");

  const bool err = draw.unit("step") < config_.error_rate;
  std::string text;

  if (contains(prompt, "address the specific issue identified")) {
    static const std::regex re(
        R"re(sub-step of "([^"]*)", the answer is "([^"]*)",[^"]*should be "([^"]*)")re");
    std::smatch m;
    std::optional<std::size_t> step;
    std::optional<std::int64_t> revised;
    if (std::regex_search(prompt, m, re)) {
      step = step_of(m[1].str());
      revised = parse_int(m[3].str());
    }
    if (!step || !revised || *step >= chain->steps.size())
      throw Error(ErrorCode::BackendUnavailable, "chain-sim", "unrecognised reflection");
    auto claimed = trace_values(prompt);
    if (claimed.empty()) claimed = qa_values(prompt);
    text = "<evaluation>The reflection on step " + std::to_string(*step + 1) +
           " is right; I recompute from the revised value.</evaluation>\n" +
           continue_from(*chain, *step, *revised, claimed, "");
  } else if (contains(prompt, "Continue the reasoning step by step from this point")) {
    static const std::regex re(R"re(for the sub-question "([^"]*)", the answer is "([^"]*)")re");
    std::smatch m;
    std::optional<std::size_t> step;
    std::optional<std::int64_t> revised;
    if (std::regex_search(prompt, m, re)) {
      step = step_of(m[1].str());
      revised = parse_int(m[2].str());
    }
    if (!step || !revised || *step >= chain->steps.size())
      throw Error(ErrorCode::BackendUnavailable, "chain-sim", "unrecognised intervention");
    auto claimed = trace_values(prompt);
    if (claimed.empty()) claimed = qa_values(prompt);
    text = continue_from(*chain, *step, *revised, claimed, "Continuing from the given answer.\n");
  } else if (contains(prompt, "was judged inadequate")) {
    text = render_solution(*chain, chain->start, 0,
                           run_chain(*chain, chain->start, 0, config_.error_step, err),
                           "Following a corrected plan.\n");
  } else if (contains(prompt, "meticulously addressing the judge's feedback")) {
    const auto judge = between(prompt, "JUDGE RESPONSE:", "Your task is");
    const auto original = between(prompt, "ORIGINAL SOLUTION:", "JUDGE RESPONSE:");
    const auto score = find_tag(judge, "answer");
    if (score && trim_copy(*score) == "5") {
      const auto kept = find_tag(original, "answer").value_or("");
      text = "<evaluation>The judge found no mistake.</evaluation>\nThe original solution stands.\n"
             "<answer>" + kept + "</answer>";
    } else {
      text = "<evaluation>Redoing the computation from scratch.</evaluation>\n" +
             render_solution(*chain, chain->start, 0,
                             run_chain(*chain, chain->start, 0, config_.error_step, err), "");
    }
  } else if (contains(prompt, "act as an impartial judge")) {
    const auto response = between(prompt, "<|The Start of Assistant's Answer|>",
                                  "<|The End of Assistant's Answer|>");
    const auto answer = find_tag(response, "answer");
    const bool right = answer && parse_int(*answer) == evaluate_chain(*chain);
    const double u = draw.unit("judge");
    int score = 5;
    if (right && u < config_.judge_false_alarm) score = 3;
    if (!right && u < config_.judge_recall) score = 1;
    text = "The response recomputes each step. " +
           std::string(score == 5 ? "I found no mistakes." : "Some step looks wrong.") +
           "\n<answer>" + std::to_string(score) + "</answer>";
  } else if (contains(prompt, "breaking down a math problem's reasoning process")) {
    const auto trajectory = between(prompt, "Complete Reasoning Process:", "\nInstructions:");
    const auto claimed = trace_values(trajectory);
    nlohmann::json steps = nlohmann::json::array();
    std::int64_t value = chain->start;
    for (std::size_t i = 0; i < chain->steps.size(); ++i) {
      auto it = claimed.find(i);
      value = it != claimed.end() ? it->second : apply_step(value, chain->steps[i]);
      steps.push_back({{"description", sub_question(i, chain->steps[i])}, {"answer", value}});
    }
    nlohmann::json doc = {{"sub-questions", steps}, {"answer", value}};
    text = "```json\n" + doc.dump(4) + "\n```";
  } else if (contains(prompt, "answer the next sub-question")) {
    const auto next = between(prompt, "The next sub-question to be answered:\n", "\n\n");
    const auto step = step_of(next);
    if (!step || *step >= chain->steps.size())
      throw Error(ErrorCode::BackendUnavailable, "chain-sim", "unrecognised sub-question");
    const auto trajectory =
        between(prompt, "The series of sub-questions and their answers:\n", "\n\nThe next sub-question");
    const auto claimed = qa_values(trajectory);
    std::int64_t previous = chain->start;
    if (*step > 0) {
      auto it = claimed.find(*step - 1);
      if (it == claimed.end())
        throw Error(ErrorCode::BackendUnavailable, "chain-sim", "missing previous sub-answer");
      previous = it->second;
    }
    std::int64_t value = apply_step(previous, chain->steps[*step]);
    if (err && static_cast<int>(*step) == config_.error_step) value += 1;
    text = "Taking the previous value " + std::to_string(previous) + " and applying '" +
           op_phrase(chain->steps[*step]) + "'.\n<answer>" + std::to_string(value) + "</answer>";
  } else if (contains(prompt, "Compare then synthesize the best answer")) {
    const auto pick = answers_majority(between(prompt, "SOLUTIONS:", "Please extend"));
    text = "Most solutions agree.\n<answer>" + pick + "</answer>";
  } else if (contains(prompt, "Judge whether this high-level plan")) {
    text = "<evaluation>The plan follows every step of the chain in order.</evaluation>\n"
           "<verdict>adequate</verdict>";
  } else if (contains(prompt, "Solve the given math problem step by step")) {
    text = render_solution(*chain, chain->start, 0,
                           run_chain(*chain, chain->start, 0, config_.error_step, err),
                           "Let me apply each step in order.\n");
  } else {
    throw Error(ErrorCode::BackendUnavailable, "chain-sim", "unrecognised prompt");
  }

  ChatResponse response;
  response.text = std::move(text);
  response.prompt_tokens = count_words(prompt);
  response.completion_tokens = count_words(response.text);
  response.backend_id = id();
  return response;
}

}  // namespace ssr
