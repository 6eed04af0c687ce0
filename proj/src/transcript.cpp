#include "ssr/transcript.hpp"

#include "ssr/error.hpp"

namespace ssr {

using nlohmann::json;

namespace {

json calls_to_json(const std::vector<CallRecord>& calls) {
  json out = json::array();
  for (const auto& c : calls)
    out.push_back({{"prompt_kind", to_string(c.kind)},
                   {"cache_hit", c.cache_hit},
                   {"prompt_tokens", c.prompt_tokens},
                   {"completion_tokens", c.completion_tokens}});
  return out;
}

std::vector<CallRecord> calls_from_json(const json& doc) {
  std::vector<CallRecord> calls;
  for (const auto& c : doc)
    calls.push_back({prompt_kind_from_string(c.at("prompt_kind").get<std::string>()),
                     c.at("cache_hit").get<bool>(), c.at("prompt_tokens").get<std::int64_t>(),
                     c.at("completion_tokens").get<std::int64_t>()});
  return calls;
}

json decomposition_to_json(const Decomposition& d) {
  json steps = json::array();
  for (const auto& s : d.steps)
    steps.push_back({{"index", s.index},
                     {"sub_question", s.sub_question},
                     {"sub_answer", s.sub_answer},
                     {"depends_on", s.depends_on}});
  json out = {{"steps", steps}, {"source_answer", d.source_answer}};
  if (d.declared_answer) out["declared_answer"] = *d.declared_answer;
  return out;
}

Decomposition decomposition_from_json(const json& doc, const std::string& trace) {
  Decomposition d;
  for (const auto& s : doc.at("steps"))
    d.steps.push_back({s.at("index").get<int>(), s.at("sub_question").get<std::string>(),
                       s.at("sub_answer").get<std::string>(),
                       s.value("depends_on", std::vector<int>{})});
  d.source_answer = doc.value("source_answer", "");
  d.source_trace = trace;
  if (doc.contains("declared_answer")) d.declared_answer = doc["declared_answer"].get<std::string>();
  return d;
}

json iteration_to_json(const IterationRecord& r) {
  json out = {{"k", r.k},
              {"route", to_string(r.route)},
              {"trace", r.trace},
              {"answer", r.answer},
              {"calls", calls_to_json(r.calls)}};
  if (r.decomposition) out["decomposition"] = decomposition_to_json(*r.decomposition);
  if (!r.references.empty()) {
    json refs = json::array();
    for (const auto& set : r.references) {
      json samples = json::array();
      for (const auto& s : set.samples) samples.push_back(s ? json(*s) : json(nullptr));
      json entry = {{"step_index", set.step_index}, {"samples", samples}, {"classes", set.classes}};
      if (set.unparseable_class) entry["unparseable_class"] = *set.unparseable_class;
      refs.push_back(std::move(entry));
    }
    out["references"] = std::move(refs);
  }
  if (r.confidences) {
    json confs = json::array();
    for (const auto& c : *r.confidences)
      confs.push_back({{"step_index", c.step_index},
                       {"raw_score", c.raw_score},
                       {"normalized", c.normalized},
                       {"mode", to_string(c.mode)}});
    out["confidences"] = std::move(confs);
  }
  if (r.feedback)
    out["feedback"] = {{"step_index", r.feedback->step_index},
                       {"sub_question", r.feedback->sub_question},
                       {"original_answer", r.feedback->original_answer},
                       {"revised_answer", r.feedback->revised_answer}};
  if (r.judge_score) out["judge_score"] = *r.judge_score;
  if (r.judge_text) out["judge_text"] = *r.judge_text;
  if (r.plan_changed) out["plan_changed"] = *r.plan_changed;
  if (r.early_exit) out["early_exit"] = true;
  if (!r.warnings.empty()) out["warnings"] = r.warnings;
  if (r.error) out["error"] = *r.error;
  return out;
}

IterationRecord iteration_from_json(const json& doc) {
  IterationRecord r;
  r.k = doc.at("k").get<int>();
  r.route = route_from_string(doc.at("route").get<std::string>());
  r.trace = doc.at("trace").get<std::string>();
  r.answer = doc.at("answer").get<std::string>();
  r.calls = calls_from_json(doc.at("calls"));
  if (doc.contains("decomposition")) r.decomposition = decomposition_from_json(doc["decomposition"], "");
  if (doc.contains("references")) {
    for (const auto& entry : doc["references"]) {
      ReferenceSet set;
      set.step_index = entry.at("step_index").get<int>();
      for (const auto& s : entry.at("samples"))
        set.samples.push_back(s.is_null() ? std::nullopt : std::optional(s.get<std::string>()));
      set.classes = entry.at("classes").get<std::vector<std::vector<std::size_t>>>();
      if (entry.contains("unparseable_class"))
        set.unparseable_class = entry["unparseable_class"].get<std::size_t>();
      r.references.push_back(std::move(set));
    }
  }
  if (doc.contains("confidences")) {
    r.confidences.emplace();
    for (const auto& c : doc["confidences"])
      r.confidences->push_back({c.at("step_index").get<int>(), c.at("raw_score").get<int>(),
                                c.at("normalized").get<double>(),
                                confidence_mode_from_string(c.at("mode").get<std::string>())});
  }
  if (doc.contains("feedback")) {
    const auto& f = doc["feedback"];
    r.feedback = SocraticFeedback{f.at("step_index").get<int>(), f.at("sub_question").get<std::string>(),
                                  f.at("original_answer").get<std::string>(),
                                  f.at("revised_answer").get<std::string>()};
  }
  if (doc.contains("judge_score")) r.judge_score = doc["judge_score"].get<int>();
  if (doc.contains("judge_text")) r.judge_text = doc["judge_text"].get<std::string>();
  if (doc.contains("plan_changed")) r.plan_changed = doc["plan_changed"].get<bool>();
  r.early_exit = doc.value("early_exit", false);
  if (doc.contains("warnings")) r.warnings = doc["warnings"].get<std::vector<std::string>>();
  if (doc.contains("error")) r.error = doc["error"].get<std::string>();
  return r;
}

}  // namespace

json to_json(const Transcript& t) {
  json iterations = json::array();
  for (const auto& r : t.iterations) iterations.push_back(iteration_to_json(r));
  json out = {{"schema_version", t.schema_version},
              {"task_id", t.task_id},
              {"question", t.question},
              {"ground_truth", t.ground_truth},
              {"answer_kind", to_string(t.answer_kind)},
              {"method", to_string(t.method)},
              {"seed", t.seed},
              {"repeat", t.repeat},
              {"slot", t.slot},
              {"config", t.config},
              {"iterations", std::move(iterations)},
              {"totals",
               {{"calls", t.totals.calls},
                {"cache_hits", t.totals.cache_hits},
                {"prompt_tokens", t.totals.prompt_tokens},
                {"completion_tokens", t.totals.completion_tokens}}}};
  if (t.final_score) out["final_score"] = *t.final_score;
  if (!t.final_calls.empty()) out["final_calls"] = calls_to_json(t.final_calls);
  if (t.error) out["error"] = *t.error;
  if (t.aborted) out["aborted"] = true;
  return out;
}

Transcript transcript_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("schema_version") || !doc["schema_version"].is_string())
    throw Error(ErrorCode::SchemaMismatch, "/schema_version", "transcript record lacks a version");
  const auto version = doc["schema_version"].get<std::string>();
  const auto major = version.substr(0, version.find('.'));
  if (major != std::to_string(kTranscriptSchemaMajor))
    throw Error(ErrorCode::SchemaVersionMismatch, version,
                "expected major version " + std::to_string(kTranscriptSchemaMajor));
  try {
    Transcript t;
    t.schema_version = version;
    t.task_id = doc.at("task_id").get<std::string>();
    t.question = doc.value("question", "");
    t.ground_truth = doc.at("ground_truth").get<std::string>();
    t.answer_kind = answer_kind_from_string(doc.at("answer_kind").get<std::string>());
    t.method = method_from_string(doc.at("method").get<std::string>());
    t.seed = doc.at("seed").get<std::uint64_t>();
    t.repeat = doc.value("repeat", 0);
    t.slot = doc.value("slot", 0);
    t.config = doc.value("config", json::object());
    for (const auto& r : doc.at("iterations")) t.iterations.push_back(iteration_from_json(r));
    const auto& totals = doc.at("totals");
    t.totals = {totals.at("calls").get<std::int64_t>(), totals.at("cache_hits").get<std::int64_t>(),
                totals.at("prompt_tokens").get<std::int64_t>(),
                totals.at("completion_tokens").get<std::int64_t>()};
    if (doc.contains("final_score")) t.final_score = doc["final_score"].get<int>();
    if (doc.contains("final_calls")) t.final_calls = calls_from_json(doc["final_calls"]);
    if (doc.contains("error")) t.error = doc["error"].get<std::string>();
    t.aborted = doc.value("aborted", false);
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, "transcript", e.what());
  }
}

std::string serialize(const Transcript& transcript) { return to_json(transcript).dump(); }

std::vector<Transcript> load_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, path.string(), "cannot open transcript file");
  std::vector<Transcript> out;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaMismatch, path.string() + ":" + std::to_string(number), e.what());
    }
    out.push_back(transcript_from_json(doc));
  }
  return out;
}

std::vector<Transcript> load_transcripts(const std::vector<std::filesystem::path>& paths) {
  std::vector<Transcript> out;
  for (const auto& p : paths) {
    auto part = load_transcripts(p);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

TranscriptWriter::TranscriptWriter(const std::filesystem::path& path, bool append) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw Error(ErrorCode::IoError, path.string(), "cannot write transcripts");
}

void TranscriptWriter::write(const Transcript& transcript) {
  const auto line = serialize(transcript);
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  out_.flush();
}

}  // namespace ssr
