#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssr/engine.hpp"

namespace ssr {

nlohmann::json to_json(const Transcript& transcript);

/// Throws SchemaVersionMismatch when the major version differs and
/// SchemaMismatch on structural problems.
Transcript transcript_from_json(const nlohmann::json& doc);

/// One JSONL line (keys sorted, no trailing newline).
std::string serialize(const Transcript& transcript);

std::vector<Transcript> load_transcripts(const std::filesystem::path& path);
std::vector<Transcript> load_transcripts(const std::vector<std::filesystem::path>& paths);

/// Appends one line per transcript and flushes each, so an interrupted run
/// keeps every finished record.
class TranscriptWriter {
 public:
  explicit TranscriptWriter(const std::filesystem::path& path, bool append = false);
  void write(const Transcript& transcript);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace ssr
