#pragma once

// Line-delimited JSON results: a manifest record embedding the exact config
// that produced the file, one record per task with its accuracy row and
// epoch-level loss summaries, and a footer with the final metrics. Writes are
// atomic (temp file + rename). Files are reproducible byte-for-byte apart
// from the manifest's created_unix field and the footer's timing block.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualhsic/trainer.hpp"

namespace dualhsic {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct RunManifest {
  std::string artifact_version = kArtifactVersion;
  std::map<std::string, std::string> config;  // resolved snapshot incl. overrides
  std::vector<std::uint64_t> seeds;           // all seeds of the parent run
  std::uint64_t seed = 0;                     // the seed this file belongs to
  std::string results_file;                   // relative file name
  std::int64_t created_unix = 0;
};

void write_results_file(const std::string& path, const RunManifest& manifest,
                        const RunResult& result);

struct StoredResults {
  RunManifest manifest;
  AccuracyMatrix S;
  double average_accuracy = 0.0;
  std::optional<double> forgetting;
};

StoredResults read_results_file(const std::string& path);

// Recomputes the final metrics from the stored accuracy rows and requires
// exact agreement with the stored values.
void validate_results_file(const std::string& path);

// Write-temp-then-rename in the destination directory.
void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace dualhsic
