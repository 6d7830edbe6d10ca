#pragma once

// Task-sequential training with rehearsal plus the two HSIC surrogate terms,
// class-incremental evaluation over all classes, and the average-accuracy /
// forgetting metrics derived from the lower-triangular accuracy grid.
//
// Determinism contract: every random choice derives from RngState(seed)
// through the named child streams below, so identical configs replay
// bit-identically (wall-clock fields excluded).
//   root.split(kStreamData)      dataset generation (unless data.seed pins it)
//   root.split(kStreamNetInit)   network initialization
//   root.split(kStreamHeadInit)  projection-head initialization
//   root.split(kStreamReservoir) buffer reservoir decisions
//   root.split(kStreamTrain)     training; per epoch, derive
//       epoch = train.split(task * 1000000 + e); shuffle = epoch.split(0);
//       draws = epoch.split(1)
// Buffer insertion happens after each optimization step, in batch order, on
// the first epoch of a task only (insert_every_epoch overrides).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualhsic/buffer.hpp"
#include "dualhsic/data.hpp"
#include "dualhsic/losses.hpp"
#include "dualhsic/network.hpp"

namespace dualhsic {

constexpr std::uint64_t kStreamData = 1;
constexpr std::uint64_t kStreamNetInit = 2;
constexpr std::uint64_t kStreamHeadInit = 3;
constexpr std::uint64_t kStreamReservoir = 4;
constexpr std::uint64_t kStreamTrain = 5;

enum class BaseMethod { er, derpp };
enum class EvalCadence { task_end, every_epoch };

struct DataConfig {
  enum class Kind { blobs, idx, csv };
  Kind kind = Kind::blobs;
  int num_tasks = 5;
  int classes_per_task = 2;
  int samples_per_class = 250;  // per class before the 80/20 train/test split
  Index dim = 20;
  double spread = 1.0;
  std::string path;  // idx prefix or csv path
  bool normalize = true;
  std::optional<std::uint64_t> seed;  // defaults to a stream derived from the run seed
};

struct ExperimentConfig {
  MlpSpec mlp;
  DualHsicConfig dualhsic;
  DataConfig data;
  BaseMethod base = BaseMethod::er;
  std::size_t buffer_capacity = 50;
  int epochs_per_task = 10;
  Index batch_size = 32;
  double lr = 0.05;
  double momentum = 0.0;
  double derpp_alpha = 0.5;
  double derpp_beta = 0.5;
  std::uint64_t seed = 0;
  EvalCadence eval_cadence = EvalCadence::task_end;
  bool head_reset_per_task = false;
  bool insert_every_epoch = false;

  void validate() const;
};

// Lower-triangular grid: rows[t-1][tau-1] = accuracy on task tau after
// training task t (both 1-based). Entries above the diagonal do not exist.
struct AccuracyMatrix {
  std::vector<std::vector<double>> rows;

  int tasks() const { return static_cast<int>(rows.size()); }
  double at(int t, int tau) const;
  void push_row(std::vector<double> row);
};

// A_t: mean of S_{t,1..t}.
double average_accuracy(const AccuracyMatrix& s, int t);

// F_t: mean over tau < t of max_{tau' in {tau..t-1}} (S_{tau',tau} - S_{t,tau});
// the max runs over the evaluations made after task tau was learned, which is
// exactly where the grid is defined. Unclamped. Requires t >= 2.
double forgetting(const AccuracyMatrix& s, int t);

struct EpochLog {
  int task = 0;   // 1-based
  int epoch = 0;  // 1-based
  int batches = 0;
  LossBreakdown mean_loss;
};

struct EpochEval {
  int task = 0;
  int epoch = 0;
  double mean_accuracy_seen = 0.0;  // over tasks 1..task
};

struct RunResult {
  AccuracyMatrix S;
  std::vector<EpochLog> epochs;
  std::vector<EpochEval> epoch_evals;  // populated when cadence = every_epoch
  double final_average_accuracy = 0.0;
  std::optional<double> final_forgetting;  // absent when T < 2
  double seconds_train = 0.0;
  double seconds_eval = 0.0;
  std::uint64_t seed = 0;
};

struct TrainerState {
  MlpParams params;
  ProjectionHead head;
  RehearsalBuffer buffer;
  RngState train_root;
  ParamGrads velocity;       // used when momentum > 0
  HeadGrads head_velocity;
  int tasks_trained = 0;
};

TaskStream build_stream(const ExperimentConfig& cfg);
TrainerState make_initial_state(const ExperimentConfig& cfg);

void train_task(TrainerState& state, const TaskData& task, const ExperimentConfig& cfg,
                int task_index, std::vector<EpochLog>* epoch_log = nullptr,
                std::vector<EpochEval>* epoch_evals = nullptr, const TaskStream* stream = nullptr);

// Class-IL accuracy on the test split of every task up to `through_task`
// (0-based, inclusive): argmax over all classes, ties to the lowest index.
std::vector<double> evaluate(const MlpParams& params, const TaskStream& stream, int through_task);

struct ExperimentOutput {
  RunResult result;
  TrainerState state;
  TaskStream stream;
};

ExperimentOutput run_experiment(const ExperimentConfig& cfg);

}  // namespace dualhsic
