#include "ssr/taskgen.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <regex>
#include <sstream>

#include "ssr/error.hpp"
#include "ssr/rng.hpp"

namespace ssr {

using nlohmann::json;

bool is_correct(const Task& task, std::string_view answer) {
  if (task.kind == AnswerKind::SudokuGrid && task.meta.contains("puzzle")) {
    const auto puzzle = parse_sudoku_grid(task.meta["puzzle"].get<std::string>());
    std::optional<SudokuGrid> candidate;
    try {
      candidate = normalize(answer, AnswerKind::SudokuGrid).grid;
    } catch (const Error&) {
      return false;
    }
    return puzzle && candidate && verify_sudoku(*puzzle, *candidate);
  }
  return equivalent(task.ground_truth, answer, task.kind);
}

json task_to_json(const Task& task) {
  json record = {{"id", task.id},
                 {"question", task.question},
                 {"answer", task.ground_truth},
                 {"kind", to_string(task.kind)}};
  if (!task.meta.empty()) record["meta"] = task.meta;
  return record;
}

Task task_from_json(const json& record, std::size_t line) {
  const std::string where = "line " + std::to_string(line);
  if (!record.is_object()) throw Error(ErrorCode::SchemaMismatch, where, "not a JSON object");
  for (const char* field : {"id", "question", "answer", "kind"})
    if (!record.contains(field) || !record[field].is_string())
      throw Error(ErrorCode::SchemaMismatch, where, std::string("missing string field '") + field + "'");

  Task task;
  task.id = record["id"].get<std::string>();
  task.question = record["question"].get<std::string>();
  task.ground_truth = record["answer"].get<std::string>();
  try {
    task.kind = answer_kind_from_string(record["kind"].get<std::string>());
  } catch (const Error&) {
    throw Error(ErrorCode::SchemaMismatch, where, "unknown kind");
  }
  if (record.contains("meta")) task.meta = record["meta"];
  try {
    normalize(task.ground_truth, task.kind);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidGroundTruth, task.id, e.what());
  }
  return task;
}

std::vector<Task> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, path.string(), "cannot open task file");
  std::vector<Task> tasks;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, "line " + std::to_string(number), e.what());
    }
    tasks.push_back(task_from_json(record, number));
  }
  return tasks;
}

void write_jsonl(const std::vector<Task>& tasks, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, path.string(), "cannot write task file");
  for (const auto& task : tasks) out << task_to_json(task).dump() << '\n';
}

// ------------------------------------------------------------------ sudoku

namespace {

bool sudoku_allows(const SudokuGrid& g, int r, int c, std::uint8_t v) {
  for (int i = 0; i < 4; ++i)
    if (g[r][i] == v || g[i][c] == v) return false;
  const int br = r / 2 * 2, bc = c / 2 * 2;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (g[br + i][bc + j] == v) return false;
  return true;
}

void count_from(SudokuGrid& g, int cell, int limit, int& found) {
  if (found >= limit) return;
  while (cell < 16 && g[cell / 4][cell % 4] != 0) ++cell;
  if (cell == 16) {
    ++found;
    return;
  }
  const int r = cell / 4, c = cell % 4;
  for (std::uint8_t v = 1; v <= 4; ++v) {
    if (!sudoku_allows(g, r, c, v)) continue;
    g[r][c] = v;
    count_from(g, cell + 1, limit, found);
    g[r][c] = 0;
    if (found >= limit) return;
  }
}

bool fill_random(SudokuGrid& g, int cell, Rng& rng) {
  if (cell == 16) return true;
  const int r = cell / 4, c = cell % 4;
  std::array<std::uint8_t, 4> digits{1, 2, 3, 4};
  shuffle(std::span(digits), rng);
  for (auto v : digits) {
    if (!sudoku_allows(g, r, c, v)) continue;
    g[r][c] = v;
    if (fill_random(g, cell + 1, rng)) return true;
    g[r][c] = 0;
  }
  return false;
}

}  // namespace

int count_sudoku_solutions(const SudokuGrid& puzzle, int limit) {
  // Clues must not already clash.
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      const auto v = puzzle[r][c];
      if (v == 0) continue;
      SudokuGrid probe = puzzle;
      probe[r][c] = 0;
      if (!sudoku_allows(probe, r, c, v)) return 0;
    }
  SudokuGrid work = puzzle;
  int found = 0;
  count_from(work, 0, limit, found);
  return found;
}

Task gen_mini_sudoku(std::uint64_t seed) {
  Rng rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    SudokuGrid solution{};
    fill_random(solution, 0, rng);
    const int target = uniform_int(rng, kMinSudokuClues, kMaxSudokuClues);

    std::array<int, 16> order{};
    for (int i = 0; i < 16; ++i) order[i] = i;
    shuffle(std::span(order), rng);

    SudokuGrid puzzle = solution;
    int clues = 16;
    for (int cell : order) {
      if (clues == target) break;
      const auto keep = puzzle[cell / 4][cell % 4];
      puzzle[cell / 4][cell % 4] = 0;
      if (count_sudoku_solutions(puzzle, 2) == 1) {
        --clues;
      } else {
        puzzle[cell / 4][cell % 4] = keep;
      }
    }
    if (clues != target) continue;

    Task task;
    task.id = "mini-sudoku-" + std::to_string(seed);
    task.kind = AnswerKind::SudokuGrid;
    task.ground_truth = format_sudoku_grid(solution);
    task.question =
        "Solve this 4x4 Mini Sudoku puzzle:\n\n" + format_sudoku_grid(puzzle) +
        "\n\nFill every blank cell (_) with a digit from 1 to 4 so that each row, each column, "
        "and each of the four 2x2 boxes contains the digits 1, 2, 3 and 4 exactly once. "
        "Give the completed grid as 4 lines of 4 digits separated by spaces.";
    task.meta = {{"generator", "mini-sudoku"},
                 {"seed", seed},
                 {"clues", clues},
                 {"puzzle", format_sudoku_grid(puzzle)}};
    return task;
  }
  throw Error(ErrorCode::GenerationTimeout, "mini-sudoku " + std::to_string(seed));
}

// ------------------------------------------------------------------- zebra

namespace {

struct Category {
  const char* name;
  const char* noun;
  const char* values[6];
  const char* describe;  // "the person who keeps the %"
  const char* has;       // "keeps the %"
  const char* has_not;   // "does not keep the %"
};

constexpr Category kCategories[] = {
    {"Name", "name", {"Alice", "Bob", "Carol", "David", "Eve", "Frank"}, "%", "is %", "is not %"},
    {"Color", "favorite color", {"red", "green", "blue", "yellow", "white", "black"},
     "the person who likes %", "likes %", "does not like %"},
    {"Pet", "pet", {"cat", "dog", "bird", "fish", "horse", "rabbit"},
     "the person who keeps the %", "keeps the %", "does not keep the %"},
    {"Drink", "drink", {"tea", "coffee", "milk", "juice", "water", "soda"},
     "the person who drinks %", "drinks %", "does not drink %"},
    {"Sport", "sport", {"tennis", "soccer", "chess", "golf", "hockey", "rugby"},
     "the person who plays %", "plays %", "does not play %"},
    {"Food", "food", {"pizza", "sushi", "pasta", "tacos", "salad", "soup"},
     "the person who eats %", "eats %", "does not eat %"},
};
constexpr int kMaxZebraSize = 6;

std::string fill(const char* pattern, std::string_view value) {
  std::string out(pattern);
  if (auto pos = out.find('%'); pos != std::string::npos) out.replace(pos, 1, value);
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string clue_text(const ZebraClue& clue) {
  const auto& c1 = kCategories[clue.attr1];
  const auto& c2 = kCategories[clue.attr2];
  const std::string d1 = fill(c1.describe, c1.values[clue.value1]);
  const std::string d2 = fill(c2.describe, c2.values[clue.value2]);
  switch (clue.type) {
    case ZebraClueType::SameEntity:
      return capitalize(d1) + " " + fill(c2.has, c2.values[clue.value2]) + ".";
    case ZebraClueType::NotSameEntity:
      return capitalize(d1) + " " + fill(c2.has_not, c2.values[clue.value2]) + ".";
    case ZebraClueType::Position:
      return capitalize(d1) + " lives in House " + std::to_string(clue.house + 1) + ".";
    case ZebraClueType::NotPosition:
      return capitalize(d1) + " does not live in House " + std::to_string(clue.house + 1) + ".";
    case ZebraClueType::LeftOf:
      return capitalize(d1) + " lives directly left of " + d2 + ".";
    case ZebraClueType::NextTo:
      return capitalize(d1) + " and " + d2 + " live next to each other.";
  }
  return {};
}

std::string_view clue_type_name(ZebraClueType type) {
  switch (type) {
    case ZebraClueType::SameEntity: return "same";
    case ZebraClueType::NotSameEntity: return "not-same";
    case ZebraClueType::Position: return "position";
    case ZebraClueType::NotPosition: return "not-position";
    case ZebraClueType::LeftOf: return "left-of";
    case ZebraClueType::NextTo: return "next-to";
  }
  return "position";
}

using Masks = std::vector<std::vector<unsigned>>;  // [attr][value] -> house bitmask

int house_of(const ZebraAssignment& a, int attr, int value) {
  const auto& row = a[attr];
  return static_cast<int>(std::find(row.begin(), row.end(), value) - row.begin());
}

bool single(unsigned mask) { return std::has_single_bit(mask); }

// Narrows masks to a fixpoint; false on contradiction.
bool propagate(Masks& dom, int n, const std::vector<ZebraClue>& clues) {
  const unsigned full = (1u << n) - 1;
  bool changed = true;
  auto narrow = [&](unsigned& target, unsigned mask) {
    const unsigned next = target & mask;
    if (next != target) {
      target = next;
      changed = true;
    }
  };
  while (changed) {
    changed = false;
    for (const auto& clue : clues) {
      unsigned& d1 = dom[clue.attr1][clue.value1];
      unsigned& d2 = dom[clue.attr2][clue.value2];
      switch (clue.type) {
        case ZebraClueType::Position: narrow(d1, 1u << clue.house); break;
        case ZebraClueType::NotPosition: narrow(d1, ~(1u << clue.house)); break;
        case ZebraClueType::SameEntity:
          narrow(d1, d2);
          narrow(d2, d1);
          break;
        case ZebraClueType::NotSameEntity:
          if (single(d1)) narrow(d2, ~d1);
          if (single(d2)) narrow(d1, ~d2);
          break;
        case ZebraClueType::LeftOf:
          narrow(d2, (d1 << 1) & full);
          narrow(d1, d2 >> 1);
          break;
        case ZebraClueType::NextTo:
          narrow(d2, ((d1 << 1) | (d1 >> 1)) & full);
          narrow(d1, ((d2 << 1) | (d2 >> 1)) & full);
          break;
      }
    }
    for (auto& values : dom) {
      for (std::size_t v = 0; v < values.size(); ++v) {
        if (values[v] == 0) return false;
        if (!single(values[v])) continue;
        for (std::size_t w = 0; w < values.size(); ++w)
          if (w != v) narrow(values[w], ~values[v]);
      }
      for (int h = 0; h < n; ++h) {
        int holders = 0;
        std::size_t last = 0;
        for (std::size_t v = 0; v < values.size(); ++v)
          if (values[v] & (1u << h)) {
            ++holders;
            last = v;
          }
        if (holders == 0) return false;
        if (holders == 1) narrow(values[last], 1u << h);
      }
    }
  }
  return true;
}

void search(Masks dom, int n, const std::vector<ZebraClue>& clues, int limit, int& found,
            ZebraAssignment* first) {
  if (found >= limit || !propagate(dom, n, clues)) return;
  int best_attr = -1, best_value = -1, best_count = n + 1;
  for (std::size_t a = 0; a < dom.size(); ++a)
    for (std::size_t v = 0; v < dom[a].size(); ++v) {
      const int count = std::popcount(dom[a][v]);
      if (count > 1 && count < best_count) {
        best_count = count;
        best_attr = static_cast<int>(a);
        best_value = static_cast<int>(v);
      }
    }
  if (best_attr < 0) {
    ZebraAssignment assignment(dom.size(), std::vector<int>(n));
    for (std::size_t a = 0; a < dom.size(); ++a)
      for (std::size_t v = 0; v < dom[a].size(); ++v)
        assignment[a][std::countr_zero(dom[a][v])] = static_cast<int>(v);
    for (const auto& clue : clues)
      if (!clue_holds(clue, assignment)) return;
    if (found == 0 && first) *first = assignment;
    ++found;
    return;
  }
  const unsigned mask = dom[best_attr][best_value];
  for (int h = 0; h < n && found < limit; ++h) {
    if (!(mask & (1u << h))) continue;
    Masks branch = dom;
    branch[best_attr][best_value] = 1u << h;
    search(std::move(branch), n, clues, limit, found, first);
  }
}

ZebraClue sample_clue(const ZebraAssignment& hidden, int n, int attributes, Rng& rng) {
  static constexpr ZebraClueType kTypes[] = {
      ZebraClueType::SameEntity, ZebraClueType::SameEntity, ZebraClueType::NotSameEntity,
      ZebraClueType::Position,   ZebraClueType::NotPosition, ZebraClueType::NotPosition,
      ZebraClueType::LeftOf,     ZebraClueType::LeftOf,      ZebraClueType::NextTo};
  ZebraClue clue;
  clue.type = kTypes[uniform_below(rng, std::size(kTypes))];
  const int a1 = uniform_int(rng, 0, attributes - 1);
  int a2 = uniform_int(rng, 0, attributes - 2);
  if (a2 >= a1) ++a2;
  clue.attr1 = a1;
  clue.attr2 = a2;
  const int h = uniform_int(rng, 0, n - 1);
  switch (clue.type) {
    case ZebraClueType::SameEntity:
      clue.value1 = hidden[a1][h];
      clue.value2 = hidden[a2][h];
      break;
    case ZebraClueType::NotSameEntity: {
      int h2 = uniform_int(rng, 0, n - 2);
      if (h2 >= h) ++h2;
      clue.value1 = hidden[a1][h];
      clue.value2 = hidden[a2][h2];
      break;
    }
    case ZebraClueType::Position:
      clue.attr2 = a1;
      clue.value1 = clue.value2 = hidden[a1][h];
      clue.house = h;
      break;
    case ZebraClueType::NotPosition: {
      int h2 = uniform_int(rng, 0, n - 2);
      if (h2 >= h) ++h2;
      clue.attr2 = a1;
      clue.value1 = clue.value2 = hidden[a1][h2];
      clue.house = h;
      break;
    }
    case ZebraClueType::LeftOf: {
      const int left = uniform_int(rng, 0, n - 2);
      clue.attr2 = uniform_int(rng, 0, attributes - 1);
      clue.value1 = hidden[a1][left];
      clue.value2 = hidden[clue.attr2][left + 1];
      break;
    }
    case ZebraClueType::NextTo: {
      const int left = uniform_int(rng, 0, n - 2);
      clue.attr2 = uniform_int(rng, 0, attributes - 1);
      const bool flip = uniform_below(rng, 2) == 1;
      clue.value1 = hidden[a1][flip ? left + 1 : left];
      clue.value2 = hidden[clue.attr2][flip ? left : left + 1];
      break;
    }
  }
  return clue;
}

}  // namespace

bool clue_holds(const ZebraClue& clue, const ZebraAssignment& a) {
  const int h1 = house_of(a, clue.attr1, clue.value1);
  const int h2 = house_of(a, clue.attr2, clue.value2);
  switch (clue.type) {
    case ZebraClueType::SameEntity: return h1 == h2;
    case ZebraClueType::NotSameEntity: return h1 != h2;
    case ZebraClueType::Position: return h1 == clue.house;
    case ZebraClueType::NotPosition: return h1 != clue.house;
    case ZebraClueType::LeftOf: return h1 + 1 == h2;
    case ZebraClueType::NextTo: return h1 + 1 == h2 || h2 + 1 == h1;
  }
  return false;
}

int count_zebra_solutions(int entities, int attributes, const std::vector<ZebraClue>& clues,
                          int limit, ZebraAssignment* first) {
  const unsigned full = (1u << entities) - 1;
  Masks dom(attributes, std::vector<unsigned>(entities, full));
  int found = 0;
  search(std::move(dom), entities, clues, limit, found, first);
  return found;
}

json zebra_clue_to_json(const ZebraClue& clue) {
  return {{"type", clue_type_name(clue.type)}, {"attr1", clue.attr1}, {"value1", clue.value1},
          {"attr2", clue.attr2}, {"value2", clue.value2}, {"house", clue.house}};
}

ZebraClue zebra_clue_from_json(const json& doc) {
  ZebraClue clue;
  const auto type = doc.at("type").get<std::string>();
  bool known = false;
  for (auto candidate : {ZebraClueType::SameEntity, ZebraClueType::NotSameEntity,
                         ZebraClueType::Position, ZebraClueType::NotPosition,
                         ZebraClueType::LeftOf, ZebraClueType::NextTo})
    if (clue_type_name(candidate) == type) {
      clue.type = candidate;
      known = true;
    }
  if (!known) throw Error(ErrorCode::SchemaMismatch, "type", type);
  clue.attr1 = doc.at("attr1").get<int>();
  clue.value1 = doc.at("value1").get<int>();
  clue.attr2 = doc.at("attr2").get<int>();
  clue.value2 = doc.at("value2").get<int>();
  clue.house = doc.at("house").get<int>();
  return clue;
}

ZebraPuzzle gen_zebra_puzzle(const ZebraSpec& spec) {
  const int n = spec.num_entities;
  const int m = spec.num_attributes;
  if (n < 2 || n > kMaxZebraSize || m < 2 || m > kMaxZebraSize)
    throw Error(ErrorCode::InvalidArgument, "zebra size", "entities and attributes must lie in [2, 6]");

  Rng rng(spec.seed);
  ZebraPuzzle puzzle;
  puzzle.spec = spec;
  puzzle.solution.assign(m, std::vector<int>(n));
  for (int a = 0; a < m; ++a) {
    puzzle.attribute_names.emplace_back(kCategories[a].name);
    puzzle.values.emplace_back();
    for (int v = 0; v < n; ++v) puzzle.values[a].emplace_back(kCategories[a].values[v]);
    for (int h = 0; h < n; ++h) puzzle.solution[a][h] = h;
    shuffle(std::span(puzzle.solution[a]), rng);
  }

  std::vector<ZebraClue> clues;
  bool unique = false;
  for (int round = 0; round < spec.max_rounds; ++round) {
    const ZebraClue clue = sample_clue(puzzle.solution, n, m, rng);
    if (std::find(clues.begin(), clues.end(), clue) != clues.end()) continue;
    clues.push_back(clue);
    if (count_zebra_solutions(n, m, clues, 2) == 1) {
      unique = true;
      break;
    }
  }
  if (!unique)
    throw Error(ErrorCode::GenerationTimeout, "zebra " + std::to_string(spec.seed),
                "no unique clue set within " + std::to_string(spec.max_rounds) + " rounds");

  // Drop clues the rest already imply.
  std::vector<std::size_t> order(clues.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(std::span(order), rng);
  std::vector<bool> keep(clues.size(), true);
  for (auto i : order) {
    keep[i] = false;
    std::vector<ZebraClue> trial;
    for (std::size_t j = 0; j < clues.size(); ++j)
      if (keep[j]) trial.push_back(clues[j]);
    if (count_zebra_solutions(n, m, trial, 2) != 1) keep[i] = true;
  }
  for (std::size_t j = 0; j < clues.size(); ++j)
    if (keep[j]) puzzle.clues.push_back(clues[j]);

  puzzle.asked_attribute = uniform_int(rng, 0, m - 1);
  puzzle.asked_house = uniform_int(rng, 0, n - 1);
  const auto& asked = kCategories[puzzle.asked_attribute];

  std::ostringstream q;
  q << "This is a logic puzzle. There are " << n << " houses, numbered 1 to " << n
    << " from left to right. Each house is occupied by a different person, and each person has "
       "a unique value for each of the following characteristics:\n";
  for (int a = 0; a < m; ++a) {
    q << " - " << kCategories[a].noun << ": ";
    for (int v = 0; v < n; ++v) q << (v ? ", " : "") << kCategories[a].values[v];
    q << "\n";
  }
  q << "\nClues:\n";
  for (std::size_t i = 0; i < puzzle.clues.size(); ++i)
    q << i + 1 << ". " << clue_text(puzzle.clues[i]) << "\n";
  q << "\nWhat is the " << asked.noun << " of the person who lives in House "
    << puzzle.asked_house + 1 << "?";

  Task& task = puzzle.task;
  task.id = "zebra-" + std::to_string(n) + "x" + std::to_string(m) + "-" + std::to_string(spec.seed);
  task.kind = AnswerKind::ExactString;
  task.question = q.str();
  task.ground_truth =
      asked.values[puzzle.solution[puzzle.asked_attribute][puzzle.asked_house]];
  json clue_docs = json::array();
  for (const auto& clue : puzzle.clues) clue_docs.push_back(zebra_clue_to_json(clue));
  task.meta = {{"generator", "zebra"},       {"seed", spec.seed},
               {"entities", n},              {"attributes", m},
               {"clues", std::move(clue_docs)}, {"solution", puzzle.solution},
               {"asked_attribute", puzzle.asked_attribute},
               {"asked_house", puzzle.asked_house}};
  return puzzle;
}

Task gen_zebra(const ZebraSpec& spec) { return gen_zebra_puzzle(spec).task; }

// ------------------------------------------------------- arithmetic chains

std::int64_t apply_step(std::int64_t value, const ChainStep& step) {
  switch (step.op) {
    case ChainOp::Add: return value + step.operand;
    case ChainOp::Subtract: return value - step.operand;
    case ChainOp::Multiply: return value * step.operand;
  }
  return value;
}

std::int64_t evaluate_chain(const ArithChain& chain) {
  std::int64_t value = chain.start;
  for (const auto& step : chain.steps) value = apply_step(value, step);
  return value;
}

std::string chain_question(const ArithChain& chain) {
  std::ostringstream q;
  q << "Start with " << chain.start << ".\n";
  for (std::size_t i = 0; i < chain.steps.size(); ++i) {
    const auto& step = chain.steps[i];
    q << "Step " << i + 1 << ": ";
    switch (step.op) {
      case ChainOp::Add: q << "add " << step.operand; break;
      case ChainOp::Subtract: q << "subtract " << step.operand; break;
      case ChainOp::Multiply: q << "multiply by " << step.operand; break;
    }
    q << ".\n";
  }
  q << "What is the final value after all steps?";
  return q.str();
}

std::optional<ArithChain> parse_chain_question(std::string_view text) {
  static const std::regex start_re(R"(Start with (-?\d+)\.)");
  static const std::regex step_re(R"(Step (\d+): (add|subtract|multiply by) (-?\d+)\.)");
  const std::string s(text);
  std::smatch m;
  if (!std::regex_search(s, m, start_re)) return std::nullopt;
  ArithChain chain;
  chain.start = std::stoll(m[1].str());
  for (auto it = std::sregex_iterator(s.begin(), s.end(), step_re); it != std::sregex_iterator();
       ++it) {
    const auto& match = *it;
    const auto number = std::stoul(match[1].str());
    if (number == 1 && !chain.steps.empty()) break;  // the question repeated later in a prompt
    if (number != chain.steps.size() + 1) return std::nullopt;
    ChainStep step;
    const auto op = match[2].str();
    step.op = op == "add" ? ChainOp::Add : op == "subtract" ? ChainOp::Subtract : ChainOp::Multiply;
    step.operand = std::stoll(match[3].str());
    chain.steps.push_back(step);
  }
  if (chain.steps.empty()) return std::nullopt;
  return chain;
}

Task gen_arith_chain(std::uint64_t seed, int steps) {
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "steps", "must be >= 1");
  Rng rng(seed);
  ArithChain chain;
  chain.start = uniform_int(rng, 2, 9);
  for (int i = 0; i < steps; ++i) {
    ChainStep step;
    switch (uniform_below(rng, 3)) {
      case 0: step = {ChainOp::Add, uniform_int(rng, 1, 9)}; break;
      case 1: step = {ChainOp::Subtract, uniform_int(rng, 1, 9)}; break;
      default: step = {ChainOp::Multiply, uniform_int(rng, 2, 4)}; break;
    }
    chain.steps.push_back(step);
  }
  Task task;
  task.id = "arith-chain-" + std::to_string(seed);
  task.kind = AnswerKind::Numeric;
  task.question = chain_question(chain);
  task.ground_truth = std::to_string(evaluate_chain(chain));
  task.meta = {{"generator", "arith-chain"}, {"seed", seed}, {"steps", steps}};
  return task;
}

}  // namespace ssr
