#include "ssr/prompts.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>

#include <nlohmann/json.hpp>

#include "ssr/error.hpp"

namespace ssr {

namespace detail {
const std::map<std::string, std::string, std::less<>>& prompt_resources();
}

namespace {

struct KindInfo {
  PromptKind kind;
  std::string_view name;
  std::string_view file;
};

constexpr KindInfo kKinds[] = {
    {PromptKind::CoT, "cot", "cot.txt"},
    {PromptKind::Verification, "verification", "verification.txt"},
    {PromptKind::RefineNormal, "refine_normal", "refine_normal.txt"},
    {PromptKind::DecomposeSSR, "decompose_ssr", "decompose_ssr.txt"},
    {PromptKind::SolveSubQuestion, "solve_sub_question", "solve_sub_question.txt"},
    {PromptKind::ConfidenceEstimate, "confidence_estimate", "confidence_estimate.txt"},
    {PromptKind::Reflection, "reflection", "reflection.txt"},
    {PromptKind::RefineSSR, "refine_ssr", "refine_ssr.txt"},
    {PromptKind::Ensemble, "ensemble", "ensemble.txt"},
    {PromptKind::HleJudge, "hle_judge", "hle_judge.txt"},
    {PromptKind::DecomposeAoTStyle, "decompose_aot", "decompose_aot.txt"},
    {PromptKind::PlanJudge, "plan_judge", "plan_judge.txt"},
    {PromptKind::PlanRefine, "plan_refine", "plan_refine.txt"},
    {PromptKind::Intervention, "intervention", "intervention.txt"},
};

const KindInfo& info(PromptKind kind) {
  for (const auto& entry : kKinds)
    if (entry.kind == kind) return entry;
  throw Error(ErrorCode::InvalidArgument, "PromptKind");
}

bool is_slot_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Walks a template, calling `literal` for plain text and `slot` for names.
template <typename Literal, typename Slot>
void scan_template(std::string_view text, Literal&& literal, Slot&& slot) {
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
      literal("{");
      i += 2;
    } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
      literal("}");
      i += 2;
    } else if (c == '{') {
      std::size_t j = i + 1;
      while (j < text.size() && is_slot_char(text[j])) ++j;
      if (j < text.size() && text[j] == '}' && j > i + 1) {
        slot(text.substr(i + 1, j - i - 1));
        i = j + 1;
      } else {
        literal(text.substr(i, 1));
        ++i;
      }
    } else {
      const std::size_t next = text.find_first_of("{}", i + 1);
      const std::size_t end = next == std::string_view::npos ? text.size() : next;
      literal(text.substr(i, end - i));
      i = end;
    }
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string_view to_string(PromptKind kind) { return info(kind).name; }

PromptKind prompt_kind_from_string(std::string_view name) {
  for (const auto& entry : kKinds)
    if (entry.name == name) return entry.kind;
  throw Error(ErrorCode::InvalidArgument, std::string(name), "unknown prompt kind");
}

std::string_view to_string(TaskDomain domain) {
  return domain == TaskDomain::Math ? "math" : "logic";
}

TaskDomain task_domain_from_string(std::string_view name) {
  if (name == "math") return TaskDomain::Math;
  if (name == "logic") return TaskDomain::Logic;
  throw Error(ErrorCode::InvalidArgument, std::string(name), "domain must be math or logic");
}

std::string_view template_text(PromptKind kind, TaskDomain domain) {
  const auto key = std::string(to_string(domain)) + "/" + std::string(info(kind).file);
  const auto& table = detail::prompt_resources();
  const auto it = table.find(key);
  if (it == table.end()) throw Error(ErrorCode::IoError, key, "template resource missing");
  return it->second;
}

std::vector<std::string> template_slots(PromptKind kind, TaskDomain domain) {
  std::vector<std::string> names;
  scan_template(
      template_text(kind, domain), [](std::string_view) {},
      [&](std::string_view name) {
        if (std::find(names.begin(), names.end(), name) == names.end())
          names.emplace_back(name);
      });
  return names;
}

std::string render(PromptKind kind, TaskDomain domain, const Slots& slots) {
  const auto required = template_slots(kind, domain);
  for (const auto& name : required)
    if (!slots.contains(name))
      throw Error(ErrorCode::MissingSlot, name,
                  "template " + std::string(to_string(kind)) + " needs it");
  for (const auto& [name, value] : slots)
    if (std::find(required.begin(), required.end(), name) == required.end())
      throw Error(ErrorCode::UnknownSlot, name,
                  "template " + std::string(to_string(kind)) + " has no such slot");

  std::string out;
  scan_template(
      template_text(kind, domain), [&](std::string_view text) { out += text; },
      [&](std::string_view name) { out += slots.find(name)->second; });
  return out;
}

std::string render_decompose_capped(TaskDomain domain, std::string_view question,
                                    std::string_view trajectory, std::string_view answer,
                                    std::optional<int> max_steps) {
  if (max_steps && *max_steps < 1)
    throw Error(ErrorCode::InvalidArgument, "max_steps", "must be >= 1");
  std::string text = render(PromptKind::DecomposeSSR, domain,
                            {{"question", std::string(question)},
                             {"trajectory", std::string(trajectory)},
                             {"answer", std::string(answer)}});
  if (!max_steps) return text;

  const std::string capped =
      "Identify the most important milestones of the reasoning process and break it down "
      "into a series of sub-questions, with the number of sub-questions less than or equal "
      "to " +
      std::to_string(*max_steps) + ".";
  // The instruction sits in the template body, ahead of any slot content.
  const auto body_start = text.find("Instructions:");
  const auto pos = text.find(kDecomposeInstruction, body_start);
  if (pos != std::string::npos) text.replace(pos, kDecomposeInstruction.size(), capped);
  return text;
}

std::string format_socratic_trajectory(std::span<const SocraticStep> steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += "\n";
    out += "Sub-question " + std::to_string(i + 1) + ": " + steps[i].sub_question + "\n";
    out += "Answer " + std::to_string(i + 1) + ": " + steps[i].sub_answer;
  }
  return out;
}

std::string format_plan(std::span<const SocraticStep> steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) out += "\n";
    out += std::to_string(i + 1) + ". " + steps[i].sub_question;
  }
  return out;
}

std::string format_reference_answers(std::span<const std::string> answers) {
  std::string out;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (i) out += "\n";
    out += std::to_string(i + 1) + ". " + answers[i];
  }
  return out;
}

std::optional<std::string> find_tag(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  auto close_pos = text.rfind(close);
  while (close_pos != std::string_view::npos) {
    const auto open_pos = text.rfind(open, close_pos);
    if (open_pos != std::string_view::npos) {
      const auto start = open_pos + open.size();
      return std::string(trim(text.substr(start, close_pos - start)));
    }
    if (close_pos == 0) break;
    close_pos = text.rfind(close, close_pos - 1);
  }
  return std::nullopt;
}

std::string extract_tag(std::string_view text, std::string_view tag) {
  if (auto found = find_tag(text, tag)) return *found;
  const std::string open = "<" + std::string(tag) + ">";
  if (text.find(open) != std::string_view::npos)
    throw Error(ErrorCode::TagUnclosed, std::string(tag));
  throw Error(ErrorCode::TagMissing, std::string(tag));
}

namespace {

std::string strip_code_fences(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto eol = text.find('\n', i);
    const auto line = text.substr(i, eol == std::string_view::npos ? std::string_view::npos
                                                                   : eol - i + 1);
    if (trim(line).substr(0, 3) != "```") out += line;
    if (eol == std::string_view::npos) break;
    i = eol + 1;
  }
  return out;
}

// End of the balanced {...} starting at `open`, skipping string literals.
std::optional<std::size_t> matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i;
  }
  return std::nullopt;
}

bool is_json_scalar_token(std::string_view token) {
  if (token == "true" || token == "false" || token == "null") return true;
  try {
    auto parsed = nlohmann::json::parse(token);
    return parsed.is_number();
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

// Quotes bare values (`1/3`, `\frac{1}{2}`, `pi`) and removes trailing commas
// so that model-written pseudo-JSON parses. Bare numbers are quoted too,
// which keeps the model's exact rendering of every answer.
std::string repair_json(std::string_view text) {
  std::string out;
  out.reserve(text.size() + 16);
  std::size_t i = 0;
  bool expect_value = false;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '"') {
      const std::size_t start = i++;
      while (i < text.size() && text[i] != '"') i += text[i] == '\\' ? 2 : 1;
      out.append(text.substr(start, std::min(i + 1, text.size()) - start));
      ++i;
      expect_value = false;
      continue;
    }
    if (c == ':' || c == '[' || (c == ',' )) {
      out += c;
      ++i;
      // Inside arrays values follow '[' and ','; inside objects only ':'.
      expect_value = true;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      out += c;
      ++i;
      continue;
    }
    if (c == '}' || c == ']') {
      // Drop a dangling comma before the closer.
      auto last = out.find_last_not_of(" \t\r\n");
      if (last != std::string::npos && out[last] == ',') out.erase(last, 1);
      out += c;
      ++i;
      expect_value = false;
      continue;
    }
    if (c == '{') {
      out += c;
      ++i;
      expect_value = false;
      continue;
    }
    if (expect_value) {
      // Raw token up to a top-level ',', '}' or ']' (or a newline ending it).
      std::size_t j = i;
      int depth = 0;
      while (j < text.size()) {
        const char d = text[j];
        if (d == '{' || d == '(' || d == '[') ++depth;
        else if ((d == '}' || d == ')' || d == ']') && depth > 0) --depth;
        else if (depth == 0 && (d == ',' || d == '}' || d == ']' || d == '\n')) break;
        ++j;
      }
      const auto token = trim(text.substr(i, j - i));
      if (token == "true" || token == "false" || token == "null" || token.empty()) {
        out.append(token);
      } else {
        out += nlohmann::json(std::string(token)).dump();
      }
      i = j;
      expect_value = false;
      continue;
    }
    out += c;
    ++i;
  }
  return out;
}

std::string value_text(const nlohmann::json& value) {
  if (value.is_string()) return std::string(trim(value.get<std::string>()));
  return value.dump();
}

}  // namespace

Decomposition parse_decomposition(std::string_view response) {
  const std::string text = strip_code_fences(response);

  nlohmann::json doc;
  bool found = false;
  for (std::size_t open = text.find('{'); open != std::string::npos;
       open = text.find('{', open + 1)) {
    const auto close = matching_brace(text, open);
    if (!close) continue;
    const std::string_view candidate(text.data() + open, *close - open + 1);
    if (candidate.find("\"sub-questions\"") == std::string_view::npos) continue;
    try {
      doc = nlohmann::json::parse(repair_json(candidate), nullptr, true, true);
      found = true;
      break;
    } catch (const nlohmann::json::exception&) {
      continue;
    }
  }
  if (!found) throw Error(ErrorCode::JsonNotFound, "sub-questions");

  if (!doc.is_object() || !doc.contains("sub-questions"))
    throw Error(ErrorCode::SchemaMismatch, "/sub-questions", "missing");
  const auto& items = doc["sub-questions"];
  if (!items.is_array()) throw Error(ErrorCode::SchemaMismatch, "/sub-questions", "not an array");
  if (items.empty()) throw Error(ErrorCode::EmptyDecomposition, "sub-questions");

  Decomposition decomposition;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string path = "/sub-questions/" + std::to_string(i);
    const auto& item = items[i];
    if (!item.is_object()) throw Error(ErrorCode::SchemaMismatch, path, "not an object");
    if (!item.contains("description") || !item["description"].is_string())
      throw Error(ErrorCode::SchemaMismatch, path + "/description", "missing");
    if (!item.contains("answer") || item["answer"].is_null())
      throw Error(ErrorCode::SchemaMismatch, path + "/answer", "missing");

    SocraticStep step;
    step.index = static_cast<int>(i);
    step.sub_question = std::string(trim(item["description"].get<std::string>()));
    step.sub_answer = value_text(item["answer"]);
    if (step.sub_question.empty())
      throw Error(ErrorCode::SchemaMismatch, path + "/description", "empty");
    if (step.sub_answer.empty())
      throw Error(ErrorCode::SchemaMismatch, path + "/answer", "empty");
    if (item.contains("depend") && item["depend"].is_array()) {
      for (const auto& dep : item["depend"]) {
        const auto dep_text = value_text(dep);
        int value = 0;
        auto [ptr, ec] = std::from_chars(dep_text.data(), dep_text.data() + dep_text.size(), value);
        if (ec == std::errc() && ptr == dep_text.data() + dep_text.size())
          step.depends_on.push_back(value);
      }
    }
    decomposition.steps.push_back(std::move(step));
  }
  if (doc.contains("answer") && !doc["answer"].is_null())
    decomposition.declared_answer = value_text(doc["answer"]);
  return decomposition;
}

int parse_score(std::string_view text) {
  const std::string content = extract_tag(text, "answer");
  int value = 0;
  const char* first = content.data();
  const char* last = content.data() + content.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec == std::errc::result_out_of_range) throw Error(ErrorCode::OutOfRange, content);
  if (ec != std::errc() || ptr != last || first == last)
    throw Error(ErrorCode::NotAnInteger, content);
  if (value < -1 || value > 5) throw Error(ErrorCode::OutOfRange, content);
  return value;
}

}  // namespace ssr
