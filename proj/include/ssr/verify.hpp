#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace ssr {

enum class AnswerKind { Numeric, ExactString, SudokuGrid };

std::string_view to_string(AnswerKind kind);
AnswerKind answer_kind_from_string(std::string_view name);

using Rational = boost::multiprecision::cpp_rational;

/// A parsed number: exact when the rendering allows it, otherwise a double.
struct NumericValue {
  std::optional<Rational> exact;
  double approx = 0.0;
};

/// 4x4 grid, 0 marks a blank cell.
using SudokuGrid = std::array<std::array<std::uint8_t, 4>, 4>;

struct CanonicalAnswer {
  AnswerKind kind = AnswerKind::Numeric;
  std::string canonical;
  // Numeric only; absent for symbolic expressions compared as strings.
  std::optional<NumericValue> numeric_value;
  // SudokuGrid only.
  std::optional<SudokuGrid> grid;
};

/// Strips whitespace and markup (\boxed{}, $...$, \text{}, trailing periods,
/// units-free suffixes) then parses per kind. Throws Error(Unparseable).
CanonicalAnswer normalize(std::string_view text, AnswerKind kind);

/// Total: any unparseable side compares false.
bool equivalent(std::string_view a, std::string_view b, AnswerKind kind);
bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b);

/// Greedy partition under `equivalent`, classes in order of first member.
/// Each class lists member indices into `answers`.
std::vector<std::vector<std::size_t>> equivalence_classes(std::span<const std::string> answers,
                                                          AnswerKind kind);

struct MajorityResult {
  std::string answer;
  double share = 0.0;
};

/// Representative of the largest class and its share; ties go to the class
/// whose first member came earliest.
MajorityResult majority_answer(std::span<const std::string> answers, AnswerKind kind);

struct ScoredAnswer {
  std::string answer;
  double score = 0.0;
};

/// Max total-score class representative; all-zero scores fall back to
/// majority_answer.
std::string weighted_best_of_n(std::span<const ScoredAnswer> candidates, AnswerKind kind);

/// Parses a 4x4 grid; '0', '_', '.', '*' and 'x' are blanks.
std::optional<SudokuGrid> parse_sudoku_grid(std::string_view text);
std::string format_sudoku_grid(const SudokuGrid& grid, char blank = '_');

/// Candidate is complete, keeps every clue, and every row, column and 2x2 box
/// is a permutation of 1..4.
bool verify_sudoku(const SudokuGrid& puzzle, const SudokuGrid& candidate);

bool verify_zebra(std::string_view ground_truth, std::string_view candidate);

}  // namespace ssr
