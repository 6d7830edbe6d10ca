#include "dualhsic/results.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dualhsic {

namespace {
using nlohmann::json;
}

void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("results: cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("results: write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("results: rename to " + path + " failed: " + ec.message());
}

void write_results_file(const std::string& path, const RunManifest& manifest,
                        const RunResult& result) {
  std::ostringstream out;

  json m;
  m["record"] = "manifest";
  m["artifact_version"] = manifest.artifact_version;
  m["seed"] = manifest.seed;
  m["seeds"] = manifest.seeds;
  m["results_file"] = manifest.results_file;
  m["created_unix"] = manifest.created_unix;
  m["config"] = manifest.config;
  out << m.dump() << '\n';

  for (int t = 1; t <= result.S.tasks(); ++t) {
    json rec;
    rec["record"] = "task";
    rec["task"] = t;
    rec["s_row"] = result.S.rows[static_cast<std::size_t>(t - 1)];
    json epochs = json::array();
    for (const EpochLog& e : result.epochs) {
      if (e.task != t) continue;
      epochs.push_back({{"epoch", e.epoch},
                        {"batches", e.batches},
                        {"total", e.mean_loss.total},
                        {"base_cl", e.mean_loss.base_cl},
                        {"hbr_x", e.mean_loss.hbr_x},
                        {"hbr_y", e.mean_loss.hbr_y},
                        {"ha", e.mean_loss.ha}});
    }
    rec["epochs"] = epochs;
    if (!result.epoch_evals.empty()) {
      json evals = json::array();
      for (const EpochEval& e : result.epoch_evals) {
        if (e.task != t) continue;
        evals.push_back({{"epoch", e.epoch}, {"mean_accuracy_seen", e.mean_accuracy_seen}});
      }
      rec["epoch_evals"] = evals;
    }
    out << rec.dump() << '\n';
  }

  json footer;
  footer["record"] = "final";
  footer["average_accuracy"] = result.final_average_accuracy;
  if (result.final_forgetting.has_value()) {
    footer["forgetting"] = *result.final_forgetting;
  } else {
    footer["forgetting"] = nullptr;
  }
  footer["timing"] = {{"train_s", result.seconds_train}, {"eval_s", result.seconds_eval}};
  out << footer.dump() << '\n';

  atomic_write_text(path, out.str());
}

StoredResults read_results_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("results: cannot open " + path);
  StoredResults stored;
  bool saw_manifest = false;
  bool saw_final = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError("results: bad json in " + path + ": " + e.what());
    }
    const std::string kind = rec.at("record").get<std::string>();
    if (kind == "manifest") {
      saw_manifest = true;
      stored.manifest.artifact_version = rec.at("artifact_version").get<std::string>();
      stored.manifest.seed = rec.at("seed").get<std::uint64_t>();
      stored.manifest.seeds = rec.at("seeds").get<std::vector<std::uint64_t>>();
      stored.manifest.results_file = rec.at("results_file").get<std::string>();
      stored.manifest.created_unix = rec.at("created_unix").get<std::int64_t>();
      stored.manifest.config = rec.at("config").get<std::map<std::string, std::string>>();
    } else if (kind == "task") {
      stored.S.push_row(rec.at("s_row").get<std::vector<double>>());
    } else if (kind == "final") {
      saw_final = true;
      stored.average_accuracy = rec.at("average_accuracy").get<double>();
      if (!rec.at("forgetting").is_null()) {
        stored.forgetting = rec.at("forgetting").get<double>();
      }
    } else {
      throw IoError("results: unknown record type '" + kind + "' in " + path);
    }
  }
  if (!saw_manifest || !saw_final) {
    throw IoError("results: " + path + " is missing manifest or final record");
  }
  return stored;
}

void validate_results_file(const std::string& path) {
  StoredResults stored = read_results_file(path);
  const int t = stored.S.tasks();
  if (t == 0) throw IoError("results: " + path + " has no task records");
  if (average_accuracy(stored.S, t) != stored.average_accuracy) {
    throw IoError("results: stored average accuracy does not recompute from S in " + path);
  }
  if (t >= 2) {
    if (!stored.forgetting.has_value() || forgetting(stored.S, t) != *stored.forgetting) {
      throw IoError("results: stored forgetting does not recompute from S in " + path);
    }
  } else if (stored.forgetting.has_value()) {
    throw IoError("results: forgetting stored for a single-task run in " + path);
  }
}

}  // namespace dualhsic
