#pragma once

// Task-stream construction: synthetic Gaussian-blob class splits, IDX and CSV
// ingestion, and global feature standardization. Classes are assigned to
// tasks by consecutive label id and the class sets of distinct tasks are
// disjoint.

#include <string>
#include <vector>

#include "dualhsic/numerics.hpp"
#include "dualhsic/rng.hpp"

namespace dualhsic {

struct TaskData {
  Matrix train_x;
  std::vector<int> train_y;
  Matrix test_x;
  std::vector<int> test_y;
  std::vector<int> classes;  // global class ids owned by this task
};

struct NormalizationRecord {
  bool applied = false;
  Vector mean;
  Vector stddev;  // 1.0 for zero-variance features (those pass through centered)
};

struct TaskStream {
  std::vector<TaskData> tasks;
  int classes_per_task = 0;
  int num_classes = 0;
  Index dim = 0;
  NormalizationRecord normalization;

  int num_tasks() const { return static_cast<int>(tasks.size()); }
};

// Seeded Gaussian clusters, one center per class, split 80/20 into stratified
// train/test. Per-class draws use independent child streams, so the same seed
// yields the same samples regardless of how classes are grouped into tasks.
TaskStream make_split_blobs(int num_tasks, int classes_per_task, int samples_per_class,
                            Index dim, double cluster_spread, RngState rng);

// IDX ingestion. `path_prefix` names <prefix>-images.idx / <prefix>-labels.idx
// and, when present, <prefix>-test-images.idx / <prefix>-test-labels.idx;
// without test files, 20% of each class is held out. Pixels are scaled to
// [0,1]; the class count must divide evenly into num_tasks groups.
TaskStream load_idx_dataset(const std::string& path_prefix, int num_tasks);

// CSV with a header row; the column named "label" holds integer class ids and
// every other column is a feature.
TaskStream load_csv_dataset(const std::string& path, int num_tasks);

// Per-feature standardization with statistics from the union of all training
// splits, applied identically to train and test data everywhere.
TaskStream normalize(TaskStream stream);

// IDX writers (big-endian, magic 0x00000803 / 0x00000801); rows are images
// flattened back to rows x cols pixels in [0,1] scaled to bytes.
void save_idx_images(const std::string& path, const Eigen::Ref<const Matrix>& images,
                     int img_rows, int img_cols);
void save_idx_labels(const std::string& path, const std::vector<int>& labels);

}  // namespace dualhsic
