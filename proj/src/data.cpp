#include "dualhsic/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "dualhsic/errors.hpp"

namespace dualhsic {

namespace {

// Groups per-class sample blocks into tasks of consecutive class ids.
TaskStream assemble_stream(const std::vector<Matrix>& train_by_class,
                           const std::vector<Matrix>& test_by_class, int num_tasks) {
  const int num_classes = static_cast<int>(train_by_class.size());
  if (num_classes % num_tasks != 0) {
    throw ConfigError("task split: " + std::to_string(num_classes) +
                      " classes not divisible into " + std::to_string(num_tasks) + " tasks");
  }
  const int per_task = num_classes / num_tasks;
  TaskStream stream;
  stream.classes_per_task = per_task;
  stream.num_classes = num_classes;
  stream.dim = train_by_class.front().cols();

  for (int t = 0; t < num_tasks; ++t) {
    TaskData task;
    Index train_rows = 0;
    Index test_rows = 0;
    for (int k = 0; k < per_task; ++k) {
      const int c = t * per_task + k;
      task.classes.push_back(c);
      train_rows += train_by_class[static_cast<std::size_t>(c)].rows();
      test_rows += test_by_class[static_cast<std::size_t>(c)].rows();
    }
    task.train_x.resize(train_rows, stream.dim);
    task.test_x.resize(test_rows, stream.dim);
    Index tr = 0;
    Index te = 0;
    for (int c : task.classes) {
      const Matrix& tr_block = train_by_class[static_cast<std::size_t>(c)];
      const Matrix& te_block = test_by_class[static_cast<std::size_t>(c)];
      task.train_x.middleRows(tr, tr_block.rows()) = tr_block;
      task.test_x.middleRows(te, te_block.rows()) = te_block;
      task.train_y.insert(task.train_y.end(), static_cast<std::size_t>(tr_block.rows()), c);
      task.test_y.insert(task.test_y.end(), static_cast<std::size_t>(te_block.rows()), c);
      tr += tr_block.rows();
      te += te_block.rows();
    }
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

}  // namespace

TaskStream make_split_blobs(int num_tasks, int classes_per_task, int samples_per_class,
                            Index dim, double cluster_spread, RngState rng) {
  if (num_tasks < 1 || classes_per_task < 1 || samples_per_class < 1 || dim < 1) {
    throw ConfigError("make_split_blobs: all counts must be >= 1");
  }
  const int num_classes = num_tasks * classes_per_task;
  const int train_n = std::max(1, (samples_per_class * 4) / 5);
  const int test_n = std::max(0, samples_per_class - train_n);

  std::vector<Matrix> train_by_class;
  std::vector<Matrix> test_by_class;
  for (int c = 0; c < num_classes; ++c) {
    RngState class_rng = rng.split(static_cast<std::uint64_t>(c));
    Vector center(dim);
    for (Index d = 0; d < dim; ++d) center(d) = class_rng.next_gaussian();
    Matrix samples(samples_per_class, dim);
    for (int i = 0; i < samples_per_class; ++i) {
      for (Index d = 0; d < dim; ++d) {
        samples(i, d) = center(d) + cluster_spread * class_rng.next_gaussian();
      }
    }
    train_by_class.push_back(samples.topRows(train_n));
    test_by_class.push_back(samples.bottomRows(test_n));
  }
  return assemble_stream(train_by_class, test_by_class, num_tasks);
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError("idx: truncated header in " + path);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

Matrix read_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("idx: cannot open " + path);
  if (read_be32(in, path) != 0x00000803u) throw IoError("idx: bad image magic in " + path);
  const std::uint32_t n = read_be32(in, path);
  const std::uint32_t rows = read_be32(in, path);
  const std::uint32_t cols = read_be32(in, path);
  const std::size_t count = std::size_t(n) * rows * cols;
  std::vector<unsigned char> bytes(count);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count))) {
    throw IoError("idx: truncated image data in " + path);
  }
  Matrix x(static_cast<Index>(n), static_cast<Index>(rows * cols));
  for (std::size_t i = 0; i < count; ++i) {
    x(static_cast<Index>(i / (rows * cols)), static_cast<Index>(i % (rows * cols))) =
        static_cast<double>(bytes[i]) / 255.0;
  }
  return x;
}

std::vector<int> read_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("idx: cannot open " + path);
  if (read_be32(in, path) != 0x00000801u) throw IoError("idx: bad label magic in " + path);
  const std::uint32_t n = read_be32(in, path);
  std::vector<unsigned char> bytes(n);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n))) {
    throw IoError("idx: truncated label data in " + path);
  }
  return std::vector<int>(bytes.begin(), bytes.end());
}

// Splits labeled rows into per-class blocks, optionally holding out 20%.
TaskStream split_labeled(const Matrix& x, const std::vector<int>& y, const Matrix* test_x,
                         const std::vector<int>* test_y, int num_tasks) {
  if (static_cast<Index>(y.size()) != x.rows()) {
    throw IoError("dataset: label count does not match sample count");
  }
  const int num_classes = y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
  if (num_classes < 1) throw IoError("dataset: no samples");

  std::vector<std::vector<Index>> rows_of(static_cast<std::size_t>(num_classes));
  for (Index i = 0; i < x.rows(); ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    if (c < 0) throw IoError("dataset: negative label");
    rows_of[static_cast<std::size_t>(c)].push_back(i);
  }

  std::vector<Matrix> train_by_class(static_cast<std::size_t>(num_classes));
  std::vector<Matrix> test_by_class(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const auto& rows = rows_of[static_cast<std::size_t>(c)];
    if (rows.empty()) throw IoError("dataset: class " + std::to_string(c) + " has no samples");
    Index n_train = static_cast<Index>(rows.size());
    Index n_test = 0;
    if (test_x == nullptr) {
      n_test = static_cast<Index>(rows.size()) / 5;  // stratified 20% holdout
      n_train -= n_test;
    }
    Matrix tr(n_train, x.cols());
    Matrix te(n_test, x.cols());
    for (Index i = 0; i < n_train; ++i) tr.row(i) = x.row(rows[static_cast<std::size_t>(i)]);
    for (Index i = 0; i < n_test; ++i) {
      te.row(i) = x.row(rows[static_cast<std::size_t>(n_train + i)]);
    }
    train_by_class[static_cast<std::size_t>(c)] = std::move(tr);
    test_by_class[static_cast<std::size_t>(c)] = std::move(te);
  }

  if (test_x != nullptr) {
    std::vector<std::vector<Index>> test_rows_of(static_cast<std::size_t>(num_classes));
    for (Index i = 0; i < test_x->rows(); ++i) {
      const int c = (*test_y)[static_cast<std::size_t>(i)];
      if (c < 0 || c >= num_classes) throw IoError("dataset: test label out of range");
      test_rows_of[static_cast<std::size_t>(c)].push_back(i);
    }
    for (int c = 0; c < num_classes; ++c) {
      const auto& rows = test_rows_of[static_cast<std::size_t>(c)];
      Matrix te(static_cast<Index>(rows.size()), test_x->cols());
      for (Index i = 0; i < te.rows(); ++i) {
        te.row(i) = test_x->row(rows[static_cast<std::size_t>(i)]);
      }
      test_by_class[static_cast<std::size_t>(c)] = std::move(te);
    }
  }
  return assemble_stream(train_by_class, test_by_class, num_tasks);
}

}  // namespace

TaskStream load_idx_dataset(const std::string& path_prefix, int num_tasks) {
  Matrix x = read_idx_images(path_prefix + "-images.idx");
  std::vector<int> y = read_idx_labels(path_prefix + "-labels.idx");

  const std::string test_images = path_prefix + "-test-images.idx";
  if (std::filesystem::exists(test_images)) {
    Matrix tx = read_idx_images(test_images);
    std::vector<int> ty = read_idx_labels(path_prefix + "-test-labels.idx");
    return split_labeled(x, y, &tx, &ty, num_tasks);
  }
  return split_labeled(x, y, nullptr, nullptr, num_tasks);
}

TaskStream load_csv_dataset(const std::string& path, int num_tasks) {
  std::ifstream in(path);
  if (!in) throw IoError("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("csv: empty file " + path);

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int label_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "label") label_col = static_cast<int>(i);
  }
  if (label_col < 0) throw IoError("csv: no column named 'label' in " + path);

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        if (col == label_col) {
          labels.push_back(std::stoi(cell));
        } else {
          row.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw IoError("csv: bad value '" + cell + "' in " + path);
      }
      ++col;
    }
    if (col != static_cast<int>(header.size())) {
      throw IoError("csv: row with " + std::to_string(col) + " cells, expected " +
                    std::to_string(header.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("csv: no data rows in " + path);

  Matrix x(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return split_labeled(x, labels, nullptr, nullptr, num_tasks);
}

TaskStream normalize(TaskStream stream) {
  const Index dim = stream.dim;
  Vector mean = Vector::Zero(dim);
  Vector col_min = Vector::Constant(dim, std::numeric_limits<double>::infinity());
  Vector col_max = Vector::Constant(dim, -std::numeric_limits<double>::infinity());
  Index total = 0;
  for (const TaskData& t : stream.tasks) {
    mean += t.train_x.colwise().sum().transpose();
    col_min = col_min.cwiseMin(t.train_x.colwise().minCoeff().transpose());
    col_max = col_max.cwiseMax(t.train_x.colwise().maxCoeff().transpose());
    total += t.train_x.rows();
  }
  if (total == 0) throw ConfigError("normalize: stream has no training data");
  mean /= static_cast<double>(total);

  Vector var = Vector::Zero(dim);
  for (const TaskData& t : stream.tasks) {
    var += (t.train_x.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  var /= static_cast<double>(total);

  Vector stddev(dim);
  for (Index d = 0; d < dim; ++d) {
    if (col_min(d) == col_max(d)) {
      // constant feature: pass through centered only (and exactly zero)
      mean(d) = col_min(d);
      stddev(d) = 1.0;
      continue;
    }
    const double s = std::sqrt(var(d));
    stddev(d) = s > 0.0 ? s : 1.0;
  }

  for (TaskData& t : stream.tasks) {
    t.train_x = ((t.train_x.rowwise() - mean.transpose()).array().rowwise() /
                 stddev.transpose().array())
                    .matrix();
    if (t.test_x.rows() > 0) {
      t.test_x = ((t.test_x.rowwise() - mean.transpose()).array().rowwise() /
                  stddev.transpose().array())
                     .matrix();
    }
  }
  stream.normalization = {true, mean, stddev};
  return stream;
}

void save_idx_images(const std::string& path, const Eigen::Ref<const Matrix>& images,
                     int img_rows, int img_cols) {
  if (static_cast<Index>(img_rows) * img_cols != images.cols()) {
    throw ShapeError("save_idx_images: rows*cols != feature width");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("idx: cannot write " + path);
  write_be32(out, 0x00000803u);
  write_be32(out, static_cast<std::uint32_t>(images.rows()));
  write_be32(out, static_cast<std::uint32_t>(img_rows));
  write_be32(out, static_cast<std::uint32_t>(img_cols));
  for (Index i = 0; i < images.rows(); ++i) {
    for (Index j = 0; j < images.cols(); ++j) {
      const double v = std::clamp(images(i, j), 0.0, 1.0);
      const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
      out.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
}

void save_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("idx: cannot write " + path);
  write_be32(out, 0x00000801u);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) {
    if (y < 0 || y > 255) throw IoError("idx: label outside byte range");
    const unsigned char b = static_cast<unsigned char>(y);
    out.write(reinterpret_cast<const char*>(&b), 1);
  }
}

}  // namespace dualhsic
