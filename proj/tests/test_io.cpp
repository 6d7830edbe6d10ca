#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"

#include "dualhsic/checkpoint.hpp"
#include "dualhsic/config.hpp"
#include "dualhsic/results.hpp"
#include "test_support.hpp"

using namespace dualhsic;
using nlohmann::json;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

const char* kSampleConfig = R"(
# desk-scale run
[mlp]
input_dim = 8
hidden_dims = [16, 16]
num_classes = 6
activation = "relu"

[dualhsic]
lambda_x = 0.001
lambda_y = 0.05
lambda_ha = -0.75
ha_target = "buffer_only"

[data]
num_tasks = 3
classes_per_task = 2
samples_per_class = 40
dim = 8
spread = 1.0

[train]
buffer_capacity = 30
epochs_per_task = 2
batch_size = 16
lr = 0.05

[run]
seeds = [0, 1]
name = "demo"
)";

}  // namespace

TEST_CASE("config parses sections, comments, and lists") {
  ConfigMap cfg = ConfigMap::from_string(kSampleConfig);
  CHECK(cfg.get_int("mlp.input_dim", 0) == 8);
  CHECK(cfg.get_double("dualhsic.lambda_ha", 0) == -0.75);
  CHECK(cfg.get_string("dualhsic.ha_target", "") == "buffer_only");
  CHECK(cfg.get_int_list("mlp.hidden_dims") == std::vector<std::int64_t>{16, 16});
  CHECK(seeds_from(cfg) == std::vector<std::uint64_t>{0, 1});
  CHECK(run_name_from(cfg) == "demo");
}

TEST_CASE("config rejects unknown keys and malformed values") {
  CHECK_THROWS_AS(ConfigMap::from_string("[mlp]\nnot_a_key = 1\n"), ConfigError);
  ConfigMap cfg = ConfigMap::from_string(kSampleConfig);
  CHECK_THROWS_AS(cfg.apply_override("nope.nope=1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("train.lr"), ConfigError);
  cfg.apply_override("train.lr=0.5");
  CHECK(cfg.get_double("train.lr", 0) == 0.5);
  cfg.apply_override("dualhsic.lambda_x=0");
  CHECK(cfg.get_double("dualhsic.lambda_x", 1) == 0.0);

  ConfigMap bad = ConfigMap::from_string("[train]\nlr = fast\n");
  CHECK_THROWS_AS(bad.get_double("train.lr", 0), ConfigError);
}

TEST_CASE("experiment config binding fills defaults") {
  ConfigMap cfg = ConfigMap::from_string(kSampleConfig);
  ExperimentConfig ec = experiment_config_from(cfg);
  CHECK(ec.mlp.hidden_dims == std::vector<Index>{16, 16});
  CHECK(ec.dualhsic.hbr_layers == std::vector<int>{1, 2});  // defaults to every layer
  CHECK(ec.dualhsic.kernel_z.sigma == 5.0);
  CHECK(ec.base == BaseMethod::er);
  CHECK(ec.batch_size == 16);

  cfg.apply_override("dualhsic.hbr_layers=[2]");
  cfg.apply_override("train.base=derpp");
  ec = experiment_config_from(cfg);
  CHECK(ec.dualhsic.hbr_layers == std::vector<int>{2});
  CHECK(ec.base == BaseMethod::derpp);
}

TEST_CASE("results file writes, reads back, and validates") {
  ConfigMap cfg = ConfigMap::from_string(kSampleConfig);
  cfg.apply_override("train.epochs_per_task=1");
  cfg.apply_override("run.seed=0");
  ExperimentConfig ec = experiment_config_from(cfg);
  ExperimentOutput out = run_experiment(ec);

  RunManifest manifest;
  manifest.config = cfg.entries();
  manifest.seeds = {0};
  manifest.seed = 0;
  manifest.results_file = "demo.seed0.jsonl";
  manifest.created_unix = 1700000000;

  const std::string path = temp_path("dualhsic_results.jsonl");
  write_results_file(path, manifest, out.result);
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));

  StoredResults stored = read_results_file(path);
  CHECK(stored.manifest.seed == 0);
  CHECK(stored.manifest.config.at("train.epochs_per_task") == "1");
  CHECK(stored.S.tasks() == out.result.S.tasks());
  CHECK(stored.average_accuracy == out.result.final_average_accuracy);
  validate_results_file(path);
  std::remove(path.c_str());
}

TEST_CASE("validation catches tampered metrics") {
  ConfigMap cfg = ConfigMap::from_string(kSampleConfig);
  cfg.apply_override("train.epochs_per_task=1");
  ExperimentConfig ec = experiment_config_from(cfg);
  ExperimentOutput out = run_experiment(ec);

  RunManifest manifest;
  manifest.config = cfg.entries();
  manifest.seeds = {0};
  manifest.seed = 0;
  manifest.results_file = "demo.seed0.jsonl";
  manifest.created_unix = 0;

  const std::string path = temp_path("dualhsic_tampered.jsonl");
  RunResult bent = out.result;
  bent.final_average_accuracy += 0.001;
  write_results_file(path, manifest, bent);
  CHECK_THROWS_AS(validate_results_file(path), IoError);
  std::remove(path.c_str());
}

// Identical runs must serialize identically apart from created_unix and the
// timing block.
TEST_CASE("results are byte-stable across reruns modulo timestamps") {
  ConfigMap cfg = ConfigMap::from_string(kSampleConfig);
  cfg.apply_override("train.epochs_per_task=1");
  ExperimentConfig ec = experiment_config_from(cfg);

  auto render = [&](std::int64_t stamp) {
    ExperimentOutput out = run_experiment(ec);
    RunManifest manifest;
    manifest.config = cfg.entries();
    manifest.seeds = {0};
    manifest.seed = 0;
    manifest.results_file = "demo.seed0.jsonl";
    manifest.created_unix = stamp;
    const std::string path = temp_path("dualhsic_stable_" + std::to_string(stamp) + ".jsonl");
    write_results_file(path, manifest, out.result);
    std::ifstream in(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
      json rec = json::parse(line);
      rec.erase("created_unix");
      rec.erase("timing");
      lines.push_back(rec.dump());
    }
    std::remove(path.c_str());
    return lines;
  };

  CHECK(render(1111) == render(2222));
}

TEST_CASE("checkpoints round-trip the network, head, and buffer exactly") {
  MlpSpec spec{5, {7, 6}, 4, Activation::tanh};
  MlpParams params = init_mlp(spec, 77);
  ProjectionHead head = init_projection_head(6, Activation::tanh, 78);

  RehearsalBuffer buffer(4, RngState(5));
  RngState rng(6);
  for (int i = 0; i < 9; ++i) {
    BufferEntry e;
    e.x = testing::random_gaussian(rng, 1, 5).row(0).transpose();
    e.y = i % 4;
    e.task_id = i % 2;
    e.logits = testing::random_gaussian(rng, 1, 4).row(0).transpose();
    buffer.observe(std::move(e));
  }

  const std::string path = temp_path("dualhsic_ckpt.txt");
  save_checkpoint(path, params, head, &buffer);
  Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.params.spec.hidden_dims == spec.hidden_dims);
  CHECK(loaded.params.init.seed == 77);
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    CHECK((loaded.params.weights[i] - params.weights[i]).norm() == 0.0);
    CHECK((loaded.params.biases[i] - params.biases[i]).norm() == 0.0);
  }
  CHECK((loaded.head.w1 - head.w1).norm() == 0.0);
  CHECK((loaded.head.w2 - head.w2).norm() == 0.0);

  REQUIRE(loaded.buffer.has_value());
  CHECK(loaded.buffer->capacity() == buffer.capacity());
  CHECK(loaded.buffer->observed() == buffer.observed());
  REQUIRE(loaded.buffer->size() == buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    CHECK((loaded.buffer->entries()[i].x - buffer.entries()[i].x).norm() == 0.0);
    CHECK(loaded.buffer->entries()[i].y == buffer.entries()[i].y);
    CHECK(loaded.buffer->entries()[i].task_id == buffer.entries()[i].task_id);
    CHECK((*loaded.buffer->entries()[i].logits - *buffer.entries()[i].logits).norm() == 0.0);
  }
  // restored reservoir continues the same stream
  BufferEntry probe;
  probe.x = Vector::Zero(5);
  probe.y = 3;
  RehearsalBuffer b2 = *loaded.buffer;
  buffer.observe(probe);
  b2.observe(probe);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    CHECK(buffer.entries()[i].y == b2.entries()[i].y);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint without a buffer loads none") {
  MlpSpec spec{3, {4}, 2, Activation::relu};
  MlpParams params = init_mlp(spec, 1);
  ProjectionHead head = init_projection_head(4, Activation::relu, 2);
  const std::string path = temp_path("dualhsic_ckpt_nobuf.txt");
  save_checkpoint(path, params, head, nullptr);
  Checkpoint loaded = load_checkpoint(path);
  CHECK_FALSE(loaded.buffer.has_value());
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects junk") {
  const std::string path = temp_path("dualhsic_ckpt_junk.txt");
  {
    std::ofstream out(path);
    out << "not a checkpoint\n";
  }
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  std::remove(path.c_str());
}
