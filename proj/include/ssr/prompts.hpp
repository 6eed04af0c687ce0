#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssr/types.hpp"

namespace ssr {

enum class PromptKind {
  CoT,
  Verification,
  RefineNormal,
  DecomposeSSR,
  SolveSubQuestion,
  ConfidenceEstimate,
  Reflection,
  RefineSSR,
  Ensemble,
  HleJudge,
  DecomposeAoTStyle,
  // Not part of the published template set; see README.
  PlanJudge,
  PlanRefine,
  Intervention,
};

enum class TaskDomain { Math, Logic };

std::string_view to_string(PromptKind kind);
PromptKind prompt_kind_from_string(std::string_view name);
std::string_view to_string(TaskDomain domain);
TaskDomain task_domain_from_string(std::string_view name);

using Slots = std::map<std::string, std::string, std::less<>>;

/// The raw template: `{name}` marks a slot, `{{` and `}}` are literal braces.
std::string_view template_text(PromptKind kind, TaskDomain domain);

/// Slot names in order of first appearance.
std::vector<std::string> template_slots(PromptKind kind, TaskDomain domain);

/// Throws MissingSlot / UnknownSlot naming the offending slot.
std::string render(PromptKind kind, TaskDomain domain, const Slots& slots);

inline constexpr std::string_view kDecomposeInstruction =
    "Break down the reasoning process into a series of sub-questions.";

/// DecomposeSSR, optionally with the milestone cap on the number of steps.
std::string render_decompose_capped(TaskDomain domain, std::string_view question,
                                    std::string_view trajectory, std::string_view answer,
                                    std::optional<int> max_steps);

/// Prior steps as the numbered Q/A list used by the re-solve and refine
/// prompts. An empty span renders as the empty string.
std::string format_socratic_trajectory(std::span<const SocraticStep> steps);

/// Prior sub-questions only, one per line (the high-level plan).
std::string format_plan(std::span<const SocraticStep> steps);

/// Numbered list, one reference answer per line.
std::string format_reference_answers(std::span<const std::string> answers);

/// Content of the last well-formed <tag>...</tag>, trimmed. Throws TagMissing,
/// or TagUnclosed when an opening tag exists but no pair is complete.
std::string extract_tag(std::string_view text, std::string_view tag);

/// Non-throwing variant of extract_tag.
std::optional<std::string> find_tag(std::string_view text, std::string_view tag);

/// Pulls the decomposition JSON out of a response (prose and code fences
/// tolerated, bare expressions and trailing commas repaired). Throws
/// JsonNotFound, SchemaMismatch (detail = JSON pointer) or EmptyDecomposition.
Decomposition parse_decomposition(std::string_view response);

/// Score inside <answer> tags, an integer in [-1, 5].
int parse_score(std::string_view text);

}  // namespace ssr
