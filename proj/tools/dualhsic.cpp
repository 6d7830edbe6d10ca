// Experiment runner: `run` executes a config across seeds and writes JSONL
// results; `sweep` repeats a run over one config axis and summarizes;
// `export-embeddings` dumps last-layer representations from a checkpoint for
// external projection/plotting.

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dualhsic/checkpoint.hpp"
#include "dualhsic/config.hpp"
#include "dualhsic/results.hpp"
#include "dualhsic/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dualhsic;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

std::string output_dir(const ConfigMap& cfg) {
  if (const char* env = std::getenv("DUALHSIC_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return cfg.get_string("io.out_dir", ".");
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  double average_accuracy = 0.0;
  std::optional<double> forgetting;
  std::string file;
};

struct RunStats {
  double mean_a = 0.0;
  double std_a = 0.0;
  double mean_f = 0.0;
  double std_f = 0.0;
};

RunStats stats_of(const std::vector<SeedOutcome>& outcomes) {
  RunStats s;
  const double n = static_cast<double>(outcomes.size());
  for (const auto& o : outcomes) {
    s.mean_a += o.average_accuracy;
    s.mean_f += o.forgetting.value_or(0.0);
  }
  s.mean_a /= n;
  s.mean_f /= n;
  for (const auto& o : outcomes) {
    s.std_a += (o.average_accuracy - s.mean_a) * (o.average_accuracy - s.mean_a);
    s.std_f += (o.forgetting.value_or(0.0) - s.mean_f) * (o.forgetting.value_or(0.0) - s.mean_f);
  }
  s.std_a = std::sqrt(s.std_a / n);
  s.std_f = std::sqrt(s.std_f / n);
  return s;
}

// Runs every seed of `cfg`, writing <stem>.seed<k>.jsonl under out_dir.
std::vector<SeedOutcome> run_all_seeds(const ConfigMap& cfg, const std::string& stem,
                                       const std::vector<std::uint64_t>& seeds,
                                       bool want_checkpoint) {
  const std::string dir = output_dir(cfg);
  fs::create_directories(dir);
  std::vector<SeedOutcome> outcomes;
  for (std::uint64_t seed : seeds) {
    ConfigMap seeded = cfg;
    seeded.set("run.seed", std::to_string(seed));
    ExperimentConfig ec = experiment_config_from(seeded);
    ExperimentOutput out = run_experiment(ec);

    RunManifest manifest;
    manifest.config = seeded.entries();
    manifest.seeds = seeds;
    manifest.seed = seed;
    manifest.results_file = stem + ".seed" + std::to_string(seed) + ".jsonl";
    manifest.created_unix = static_cast<std::int64_t>(std::time(nullptr));

    const std::string path = (fs::path(dir) / manifest.results_file).string();
    write_results_file(path, manifest, out.result);

    if (want_checkpoint || cfg.get_bool("io.save_checkpoint", false)) {
      const std::string ckpt =
          (fs::path(dir) / (stem + ".seed" + std::to_string(seed) + ".ckpt")).string();
      save_checkpoint(ckpt, out.state.params, out.state.head, &out.state.buffer);
    }

    SeedOutcome oc;
    oc.seed = seed;
    oc.average_accuracy = out.result.final_average_accuracy;
    oc.forgetting = out.result.final_forgetting;
    oc.file = manifest.results_file;
    outcomes.push_back(oc);
    std::printf("seed %llu: A=%.4f F=%s -> %s\n", static_cast<unsigned long long>(seed),
                oc.average_accuracy,
                oc.forgetting ? std::to_string(*oc.forgetting).c_str() : "n/a", path.c_str());
  }
  return outcomes;
}

void write_summary(const ConfigMap& cfg, const std::string& stem,
                   const std::vector<SeedOutcome>& outcomes) {
  RunStats s = stats_of(outcomes);
  json summary;
  summary["stem"] = stem;
  summary["mean_average_accuracy"] = s.mean_a;
  summary["std_average_accuracy"] = s.std_a;
  summary["mean_forgetting"] = s.mean_f;
  summary["std_forgetting"] = s.std_f;
  json per_seed = json::array();
  for (const auto& o : outcomes) {
    per_seed.push_back({{"seed", o.seed},
                        {"average_accuracy", o.average_accuracy},
                        {"forgetting", o.forgetting ? json(*o.forgetting) : json(nullptr)},
                        {"file", o.file}});
  }
  summary["runs"] = per_seed;
  const std::string path =
      (fs::path(output_dir(cfg)) / (stem + ".summary.json")).string();
  atomic_write_text(path, summary.dump(2) + "\n");
  std::printf("summary: A=%.4f±%.4f F=%.4f±%.4f -> %s\n", s.mean_a, s.std_a, s.mean_f, s.std_f,
              path.c_str());
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            std::optional<std::uint64_t> seed_flag, bool save_ckpt) {
  ConfigMap cfg = ConfigMap::from_file(config_path);
  for (const std::string& kv : overrides) cfg.apply_override(kv);
  std::vector<std::uint64_t> seeds = seed_flag ? std::vector<std::uint64_t>{*seed_flag}
                                               : seeds_from(cfg);
  const std::string stem = run_name_from(cfg);
  std::vector<SeedOutcome> outcomes = run_all_seeds(cfg, stem, seeds, save_ckpt);
  write_summary(cfg, stem, outcomes);
  return kExitOk;
}

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == '.' || c == '/' || c == '\\' || c == ' ' || c == '[' || c == ']' || c == ',') {
      c = '_';
    }
  }
  return out;
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::string& values_csv, const std::vector<std::string>& overrides) {
  ConfigMap base = ConfigMap::from_file(config_path);
  for (const std::string& kv : overrides) base.apply_override(kv);
  if (!ConfigMap::is_known_key(axis)) {
    throw ConfigError("sweep: axis '" + axis + "' is not a config key");
  }
  std::vector<std::string> values;
  {
    std::stringstream ss(values_csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty()) values.push_back(cell);
    }
  }
  if (values.empty()) throw ConfigError("sweep: empty value list");

  const std::vector<std::uint64_t> seeds = seeds_from(base);
  const std::string name = run_name_from(base);
  json table = json::array();
  std::printf("%-24s %-18s %-18s\n", axis.c_str(), "A (mean±std)", "F (mean±std)");
  for (const std::string& v : values) {
    ConfigMap cfg = base;
    cfg.set(axis, v);
    const std::string stem = name + "." + sanitize(axis) + "_" + sanitize(v);
    std::vector<SeedOutcome> outcomes = run_all_seeds(cfg, stem, seeds, false);
    write_summary(cfg, stem, outcomes);
    RunStats s = stats_of(outcomes);
    table.push_back({{"value", v},
                     {"mean_average_accuracy", s.mean_a},
                     {"std_average_accuracy", s.std_a},
                     {"mean_forgetting", s.mean_f},
                     {"std_forgetting", s.std_f},
                     {"stem", stem}});
    std::printf("%-24s %.4f±%.4f      %.4f±%.4f\n", v.c_str(), s.mean_a, s.std_a, s.mean_f,
                s.std_f);
  }
  json summary;
  summary["axis"] = axis;
  summary["points"] = table;
  const std::string path =
      (fs::path(output_dir(base)) / (name + ".sweep_" + sanitize(axis) + ".json")).string();
  atomic_write_text(path, summary.dump(2) + "\n");
  std::printf("sweep summary -> %s\n", path.c_str());
  return kExitOk;
}

int cmd_export_embeddings(const std::string& ckpt_path, const std::string& data_config,
                          const std::string& out_path, const std::string& split) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  ConfigMap cfg = ConfigMap::from_file(data_config);
  ExperimentConfig ec = experiment_config_from(cfg);
  ec.mlp = ckpt.params.spec;  // the checkpoint's spec header governs
  TaskStream stream = build_stream(ec);

  std::ostringstream csv;
  const Index d = ckpt.params.spec.latent_dim();
  for (Index j = 1; j <= d; ++j) csv << "z_" << j << ',';
  csv << "label,task_id\n";

  char buf[64];
  auto emit = [&](const Matrix& x, const std::vector<int>& y, int task_id) {
    if (x.rows() == 0) return;
    ForwardTrace trace = forward(ckpt.params, x);
    const Matrix& z = trace.z.back();
    for (Index i = 0; i < z.rows(); ++i) {
      for (Index j = 0; j < z.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", z(i, j));
        csv << buf << ',';
      }
      csv << y[static_cast<std::size_t>(i)] << ',' << task_id << '\n';
    }
  };

  for (int t = 0; t < stream.num_tasks(); ++t) {
    const TaskData& task = stream.tasks[static_cast<std::size_t>(t)];
    if (split == "train" || split == "all") emit(task.train_x, task.train_y, t);
    if (split == "test" || split == "all") emit(task.test_x, task.test_y, t);
  }
  atomic_write_text(out_path, csv.str());
  std::printf("embeddings -> %s\n", out_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"continual-learning experiments with HSIC bottleneck and alignment losses"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed_flag;
  bool save_ckpt = false;

  CLI::App* run = app.add_subcommand("run", "run a config across its seeds");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--seed", seed_flag, "run a single seed instead of run.seeds");
  run->add_option("--override", overrides, "dotted-key overrides, key=value");
  run->add_flag("--save-checkpoint", save_ckpt, "write a checkpoint per seed");

  std::string axis;
  std::string values_csv;
  CLI::App* sweep = app.add_subcommand("sweep", "repeat a run over one config axis");
  sweep->add_option("config", config_path, "config file")->required();
  sweep->add_option("--axis", axis, "dotted config key to vary")->required();
  sweep->add_option("--values", values_csv, "comma-separated values")->required();
  sweep->add_option("--override", overrides, "dotted-key overrides, key=value");

  std::string ckpt_path;
  std::string data_config;
  std::string out_path;
  std::string split = "all";
  CLI::App* exp = app.add_subcommand("export-embeddings",
                                     "dump last-layer representations to csv");
  exp->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
  exp->add_option("data", data_config, "config file describing the dataset")->required();
  exp->add_option("out", out_path, "output csv path")->required();
  exp->add_option("--split", split, "train|test|all")
      ->check(CLI::IsMember({"train", "test", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, overrides, seed_flag, save_ckpt);
    if (sweep->parsed()) return cmd_sweep(config_path, axis, values_csv, overrides);
    if (exp->parsed()) return cmd_export_embeddings(ckpt_path, data_config, out_path, split);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDivergence;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
