#include "ssr/verify.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <regex>

#include "ssr/error.hpp"

namespace ssr {

std::string_view to_string(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::Numeric: return "numeric";
    case AnswerKind::ExactString: return "exact-string";
    case AnswerKind::SudokuGrid: return "sudoku-grid";
  }
  return "numeric";
}

AnswerKind answer_kind_from_string(std::string_view name) {
  if (name == "numeric") return AnswerKind::Numeric;
  if (name == "exact-string" || name == "exact_string" || name == "string")
    return AnswerKind::ExactString;
  if (name == "sudoku-grid" || name == "sudoku_grid" || name == "sudoku")
    return AnswerKind::SudokuGrid;
  throw Error(ErrorCode::InvalidArgument, std::string(name), "unknown answer kind");
}

namespace {

constexpr double kTolerance = 1e-9;
constexpr int kMaxExactExponent = 4000;

std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

// Index just past the brace group opening at `open`, or npos.
std::size_t brace_group_end(const std::string& s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    else if (s[i] == '}' && --depth == 0) return i + 1;
  }
  return std::string::npos;
}

// \cmd{X} -> X for every occurrence.
void unwrap_command(std::string& s, std::string_view command) {
  const std::string head = std::string(command) + "{";
  for (auto pos = s.find(head); pos != std::string::npos; pos = s.find(head, pos)) {
    const auto open = pos + command.size();
    const auto end = brace_group_end(s, open);
    if (end == std::string::npos) return;
    s = s.substr(0, pos) + s.substr(open + 1, end - open - 2) + s.substr(end);
  }
}

// \frac{a}{b} -> (a)/(b); parentheses dropped again when a and b are plain.
void rewrite_fracs(std::string& s) {
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  for (auto pos = s.find("\\frac{"); pos != std::string::npos; pos = s.find("\\frac{")) {
    const auto num_open = pos + 5;
    const auto num_end = brace_group_end(s, num_open);
    if (num_end == std::string::npos || num_end >= s.size() || s[num_end] != '{') return;
    const auto den_end = brace_group_end(s, num_end);
    if (den_end == std::string::npos) return;
    const auto num = s.substr(num_open + 1, num_end - num_open - 2);
    const auto den = s.substr(num_end + 1, den_end - num_end - 2);
    auto plain = [](std::string t) {
      if (!t.empty() && (t[0] == '-' || t[0] == '+')) t.erase(0, 1);
      return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
      });
    };
    const std::string rewritten = plain(num) && plain(den)
                                      ? num + "/" + den
                                      : "(" + num + ")/(" + den + ")";
    s = s.substr(0, pos) + rewritten + s.substr(den_end);
  }
}

std::string strip_markup(std::string_view raw) {
  std::string s = trim_copy(raw);
  // Math-mode delimiters.
  for (auto [open, close] : {std::pair{"$$", "$$"}, std::pair{"$", "$"},
                             std::pair{"\\(", "\\)"}, std::pair{"\\[", "\\]"}}) {
    const std::string_view o(open), c(close);
    if (s.size() >= o.size() + c.size() && starts_with(s, o) &&
        s.compare(s.size() - c.size(), c.size(), c) == 0) {
      s = trim_copy(std::string_view(s).substr(o.size(), s.size() - o.size() - c.size()));
    }
  }
  unwrap_command(s, "\\boxed");
  unwrap_command(s, "\\fbox");
  s = trim_copy(s);
  while (!s.empty() && (s.back() == '.' || s.back() == ';')) s.pop_back();
  return trim_copy(s);
}

std::optional<Rational> pow10(int exponent) {
  if (std::abs(exponent) > kMaxExactExponent) return std::nullopt;
  boost::multiprecision::cpp_int base = 1;
  for (int i = 0; i < std::abs(exponent); ++i) base *= 10;
  return exponent >= 0 ? Rational(base) : Rational(1) / Rational(base);
}

// Decimal or scientific literal as an exact rational.
std::optional<NumericValue> parse_decimal(const std::string& s) {
  static const std::regex pattern(R"(^([+-]?)(\d*)(?:\.(\d*))?(?:[eE]([+-]?\d+))?$)");
  std::smatch m;
  if (!std::regex_match(s, m, pattern)) return std::nullopt;
  const std::string int_part = m[2].str();
  const std::string frac_part = m[3].str();
  if (int_part.empty() && frac_part.empty()) return std::nullopt;

  NumericValue value;
  value.approx = std::strtod(s.c_str(), nullptr);
  long exponent = 0;
  if (m[4].matched) {
    exponent = std::strtol(m[4].str().c_str(), nullptr, 10);
    if (std::abs(exponent) > kMaxExactExponent) return value;
  }
  // Leading zeros would make cpp_int read the digits as octal.
  std::string digits = int_part + frac_part;
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size()));
  boost::multiprecision::cpp_int mantissa(digits.empty() ? "0" : digits);
  const auto scale = pow10(static_cast<int>(exponent) - static_cast<int>(frac_part.size()));
  if (!scale) return value;
  Rational exact = Rational(mantissa) * *scale;
  if (m[1].str() == "-") exact = -exact;
  value.exact = exact;
  return value;
}

std::optional<NumericValue> parse_number(const std::string& s) {
  if (auto value = parse_decimal(s)) return value;
  const auto slash = s.find('/');
  if (slash == std::string::npos || s.find('/', slash + 1) != std::string::npos)
    return std::nullopt;
  auto num = parse_decimal(s.substr(0, slash));
  auto den = parse_decimal(s.substr(slash + 1));
  if (!num || !den || den->approx == 0.0) return std::nullopt;
  NumericValue value;
  value.approx = num->approx / den->approx;
  if (num->exact && den->exact && *den->exact != 0) value.exact = *num->exact / *den->exact;
  return value;
}

std::string rational_text(const Rational& r) {
  if (boost::multiprecision::denominator(r) == 1) return boost::multiprecision::numerator(r).str();
  return boost::multiprecision::numerator(r).str() + "/" +
         boost::multiprecision::denominator(r).str();
}

bool looks_symbolic(const std::string& s) {
  if (s.empty()) return false;
  if (s.find_first_of("\\^_{}()*+") != std::string::npos) return true;
  for (std::string_view word : {"pi", "sqrt", "infty", "log", "sin", "cos", "exp", "√", "π"})
    if (s.find(word) != std::string::npos) return true;
  return false;
}

CanonicalAnswer normalize_numeric(std::string_view raw) {
  std::string s = strip_markup(raw);
  unwrap_command(s, "\\text");
  unwrap_command(s, "\\mathrm");
  unwrap_command(s, "\\textbf");

  // A leading "x =" or "answer:" label.
  static const std::regex label(R"(^\s*(?:[A-Za-z]\w*\s*=|[Aa]nswer\s*:)\s*)");
  s = std::regex_replace(s, label, "");

  for (std::string_view noise : {"\\!", "\\,", "\\;", "\\ ", "~", "\\left", "\\right"})
    replace_all(s, noise, "");
  for (std::string_view suffix : {"^{\\circ}", "^\\circ", "\\%", "%", "\\$", "$"})
    replace_all(s, suffix, "");
  rewrite_fracs(s);

  s.erase(std::remove_if(s.begin(), s.end(),
                         [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
          s.end());
  while (!s.empty() && s.back() == '.') s.pop_back();

  static const std::regex thousands(R"(^[+-]?\d{1,3}(,\d{3})+(\.\d*)?$)");
  if (std::regex_match(s, thousands)) s.erase(std::remove(s.begin(), s.end(), ','), s.end());

  // Plain parentheses around a number.
  while (s.size() >= 2 && s.front() == '(' && s.back() == ')' &&
         s.find_first_of("()", 1) == s.size() - 1)
    s = s.substr(1, s.size() - 2);

  CanonicalAnswer out;
  out.kind = AnswerKind::Numeric;
  if (auto value = parse_number(s)) {
    out.canonical = value->exact ? rational_text(*value->exact) : [&] {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", value->approx);
      return std::string(buf);
    }();
    out.numeric_value = std::move(value);
    return out;
  }
  if (!looks_symbolic(s))
    throw Error(ErrorCode::Unparseable, "numeric", "cannot read '" + std::string(raw) + "'");
  out.canonical = s;
  return out;
}

CanonicalAnswer normalize_string(std::string_view raw) {
  std::string s = strip_markup(raw);
  unwrap_command(s, "\\text");
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    s = trim_copy(std::string_view(s).substr(1, s.size() - 2));
  std::string collapsed;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !collapsed.empty()) collapsed += ' ';
    space = false;
    collapsed += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (collapsed.empty()) throw Error(ErrorCode::Unparseable, "exact-string", "empty answer");
  CanonicalAnswer out;
  out.kind = AnswerKind::ExactString;
  out.canonical = std::move(collapsed);
  return out;
}

}  // namespace

std::optional<SudokuGrid> parse_sudoku_grid(std::string_view text) {
  std::vector<std::uint8_t> cells;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto eol = text.find('\n', start);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(start, eol - start);
    if (auto colon = line.rfind(':'); colon != std::string_view::npos)
      line = line.substr(colon + 1);
    for (char c : line) {
      if (c >= '0' && c <= '9') {
        if (c > '4') return std::nullopt;
        cells.push_back(static_cast<std::uint8_t>(c - '0'));
      } else if (c == '_' || c == '.' || c == '*') {
        cells.push_back(0);
      } else if (std::isalpha(static_cast<unsigned char>(c))) {
        return std::nullopt;
      }
    }
    start = eol + 1;
  }
  if (cells.size() != 16) return std::nullopt;
  SudokuGrid grid{};
  for (std::size_t i = 0; i < 16; ++i) grid[i / 4][i % 4] = cells[i];
  return grid;
}

std::string format_sudoku_grid(const SudokuGrid& grid, char blank) {
  std::string out;
  for (int r = 0; r < 4; ++r) {
    if (r) out += '\n';
    for (int c = 0; c < 4; ++c) {
      if (c) out += ' ';
      out += grid[r][c] == 0 ? blank : static_cast<char>('0' + grid[r][c]);
    }
  }
  return out;
}

CanonicalAnswer normalize(std::string_view text, AnswerKind kind) {
  switch (kind) {
    case AnswerKind::Numeric: return normalize_numeric(text);
    case AnswerKind::ExactString: return normalize_string(text);
    case AnswerKind::SudokuGrid: {
      std::string s = strip_markup(text);
      unwrap_command(s, "\\text");
      auto grid = parse_sudoku_grid(s);
      if (!grid) throw Error(ErrorCode::Unparseable, "sudoku-grid", "need 16 cells over 1..4");
      CanonicalAnswer out;
      out.kind = kind;
      out.canonical = format_sudoku_grid(*grid);
      out.grid = grid;
      return out;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "kind");
}

bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case AnswerKind::Numeric: {
      if (a.numeric_value && b.numeric_value) {
        if (a.numeric_value->exact && b.numeric_value->exact)
          return *a.numeric_value->exact == *b.numeric_value->exact;
        return std::fabs(a.numeric_value->approx - b.numeric_value->approx) <= kTolerance;
      }
      if (a.numeric_value || b.numeric_value) return false;
      return a.canonical == b.canonical;
    }
    case AnswerKind::ExactString: return a.canonical == b.canonical;
    case AnswerKind::SudokuGrid: return a.grid && b.grid && *a.grid == *b.grid;
  }
  return false;
}

bool equivalent(std::string_view a, std::string_view b, AnswerKind kind) {
  try {
    return equivalent(normalize(a, kind), normalize(b, kind));
  } catch (const Error&) {
    return false;
  }
}

std::vector<std::vector<std::size_t>> equivalence_classes(std::span<const std::string> answers,
                                                          AnswerKind kind) {
  std::vector<std::optional<CanonicalAnswer>> parsed;
  parsed.reserve(answers.size());
  for (const auto& answer : answers) {
    try {
      parsed.emplace_back(normalize(answer, kind));
    } catch (const Error&) {
      parsed.emplace_back(std::nullopt);
    }
  }
  std::vector<std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    bool placed = false;
    if (parsed[i]) {
      for (auto& cls : classes) {
        const auto& rep = parsed[cls.front()];
        if (rep && equivalent(*rep, *parsed[i])) {
          cls.push_back(i);
          placed = true;
          break;
        }
      }
    }
    if (!placed) classes.push_back({i});
  }
  return classes;
}

MajorityResult majority_answer(std::span<const std::string> answers, AnswerKind kind) {
  if (answers.empty()) throw Error(ErrorCode::InvalidArgument, "answers", "empty");
  const auto classes = equivalence_classes(answers, kind);
  const auto* best = &classes.front();
  for (const auto& cls : classes)
    if (cls.size() > best->size()) best = &cls;
  return {answers[best->front()],
          static_cast<double>(best->size()) / static_cast<double>(answers.size())};
}

std::string weighted_best_of_n(std::span<const ScoredAnswer> candidates, AnswerKind kind) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "candidates", "empty");
  std::vector<std::string> answers;
  double total = 0.0;
  for (const auto& candidate : candidates) {
    answers.push_back(candidate.answer);
    total += candidate.score;
  }
  if (total == 0.0) return majority_answer(answers, kind).answer;

  const auto classes = equivalence_classes(answers, kind);
  std::size_t best = 0;
  double best_weight = -1.0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    double weight = 0.0;
    for (auto i : classes[c]) weight += candidates[i].score;
    if (weight > best_weight) {
      best_weight = weight;
      best = c;
    }
  }
  return answers[classes[best].front()];
}

bool verify_sudoku(const SudokuGrid& puzzle, const SudokuGrid& candidate) {
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      const auto v = candidate[r][c];
      if (v < 1 || v > 4) return false;
      if (puzzle[r][c] != 0 && puzzle[r][c] != v) return false;
    }
  auto is_permutation = [](std::array<std::uint8_t, 4> group) {
    unsigned seen = 0;
    for (auto v : group) seen |= 1u << v;
    return seen == 0b11110;
  };
  for (int i = 0; i < 4; ++i) {
    std::array<std::uint8_t, 4> row{}, col{}, box{};
    for (int j = 0; j < 4; ++j) {
      row[j] = candidate[i][j];
      col[j] = candidate[j][i];
      box[j] = candidate[(i / 2) * 2 + j / 2][(i % 2) * 2 + j % 2];
    }
    if (!is_permutation(row) || !is_permutation(col) || !is_permutation(box)) return false;
  }
  return true;
}

bool verify_zebra(std::string_view ground_truth, std::string_view candidate) {
  return equivalent(ground_truth, candidate, AnswerKind::ExactString);
}

}  // namespace ssr
