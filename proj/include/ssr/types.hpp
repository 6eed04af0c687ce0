#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ssr {

/// One (sub-question, sub-answer) pair of a decomposed reasoning trace.
struct SocraticStep {
  int index = 0;
  std::string sub_question;
  std::string sub_answer;
  // Parsed when the model emits it; the engine treats steps as a linear chain.
  std::vector<int> depends_on;

  bool operator==(const SocraticStep&) const = default;
};

/// Ordered Socratic steps recovered from a trace z with final answer y.
struct Decomposition {
  std::vector<SocraticStep> steps;
  std::string source_trace;
  std::string source_answer;
  // The trailing "answer" field of the decomposition JSON, if present.
  std::optional<std::string> declared_answer;

  bool operator==(const Decomposition&) const = default;
};

}  // namespace ssr
