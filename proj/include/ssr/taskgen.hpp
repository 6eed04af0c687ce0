#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssr/prompts.hpp"
#include "ssr/verify.hpp"

namespace ssr {

struct Task {
  std::string id;
  std::string question;
  std::string ground_truth;
  AnswerKind kind = AnswerKind::Numeric;
  nlohmann::json meta = nlohmann::json::object();

  /// Numeric tasks use the math role line, puzzles the logical one.
  TaskDomain domain() const {
    return kind == AnswerKind::Numeric ? TaskDomain::Math : TaskDomain::Logic;
  }
};

/// Ground-truth check used by every metric. Sudoku tasks carrying their
/// puzzle in meta are checked by the rule verifier, others by equivalence.
bool is_correct(const Task& task, std::string_view answer);

nlohmann::json task_to_json(const Task& task);
/// Throws SchemaMismatch(detail = "line N") or InvalidGroundTruth(id).
Task task_from_json(const nlohmann::json& record, std::size_t line);

std::vector<Task> load_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::vector<Task>& tasks, const std::filesystem::path& path);

// ---------------------------------------------------------------- sudoku

/// Number of completions of a 4x4 puzzle, stopping once `limit` is reached.
int count_sudoku_solutions(const SudokuGrid& puzzle, int limit = 2);

inline constexpr int kMinSudokuClues = 6;
inline constexpr int kMaxSudokuClues = 10;

/// 4x4 puzzle with a unique completion and 6..10 clues.
Task gen_mini_sudoku(std::uint64_t seed);

// ----------------------------------------------------------------- zebra

struct ZebraSpec {
  int num_entities = 3;
  int num_attributes = 3;
  std::uint64_t seed = 0;
  int max_rounds = 2000;
};

enum class ZebraClueType { SameEntity, NotSameEntity, Position, NotPosition, LeftOf, NextTo };

/// One clue over (attribute, value) indices. Position clues use `house`.
struct ZebraClue {
  ZebraClueType type = ZebraClueType::Position;
  int attr1 = 0, value1 = 0;
  int attr2 = 0, value2 = 0;
  int house = 0;

  bool operator==(const ZebraClue&) const = default;
};

/// assignment[attr][house] = value index.
using ZebraAssignment = std::vector<std::vector<int>>;

struct ZebraPuzzle {
  ZebraSpec spec;
  std::vector<std::string> attribute_names;
  std::vector<std::vector<std::string>> values;  // [attr][value]
  std::vector<ZebraClue> clues;
  ZebraAssignment solution;
  int asked_attribute = 0;
  int asked_house = 0;
  Task task;
};

bool clue_holds(const ZebraClue& clue, const ZebraAssignment& assignment);

/// Propagation plus backtracking; counts models up to `limit`.
int count_zebra_solutions(int entities, int attributes, const std::vector<ZebraClue>& clues,
                          int limit = 2, ZebraAssignment* first = nullptr);

/// Throws GenerationTimeout after spec.max_rounds clue samples.
ZebraPuzzle gen_zebra_puzzle(const ZebraSpec& spec);
Task gen_zebra(const ZebraSpec& spec);

nlohmann::json zebra_clue_to_json(const ZebraClue& clue);
ZebraClue zebra_clue_from_json(const nlohmann::json& doc);

// ---------------------------------------------------- arithmetic chains

enum class ChainOp { Add, Subtract, Multiply };

struct ChainStep {
  ChainOp op = ChainOp::Add;
  std::int64_t operand = 0;

  bool operator==(const ChainStep&) const = default;
};

/// A start value and a list of operations; the answer is the final value.
struct ArithChain {
  std::int64_t start = 0;
  std::vector<ChainStep> steps;

  bool operator==(const ArithChain&) const = default;
};

std::int64_t apply_step(std::int64_t value, const ChainStep& step);
std::int64_t evaluate_chain(const ArithChain& chain);
std::string chain_question(const ArithChain& chain);
/// Inverse of chain_question; nullopt when the text is not a chain question.
std::optional<ArithChain> parse_chain_question(std::string_view text);

Task gen_arith_chain(std::uint64_t seed, int steps = 4);

}  // namespace ssr
