#include "dualhsic/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "dualhsic/errors.hpp"

namespace dualhsic {

namespace {

using nlohmann::json;

constexpr const char* kMagic = "dualhsic-checkpoint v1";

std::string activation_name(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

Activation activation_from(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw IoError("checkpoint: unknown activation '" + s + "'");
}

void write_tensor(std::ostream& out, const std::string& name,
                  const Eigen::Ref<const Matrix>& m) {
  out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%a", m(i, j));
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

class TensorReader {
 public:
  explicit TensorReader(std::istream& in) : in_(in) {}

  // Reads the next "tensor <name> <rows> <cols>" block.
  bool next(std::string& name, Matrix& m) {
    std::string line;
    if (!std::getline(in_, line)) return false;
    std::istringstream head(line);
    std::string tag;
    Index rows = 0;
    Index cols = 0;
    head >> tag >> name >> rows >> cols;
    if (tag != "tensor" || head.fail()) throw IoError("checkpoint: malformed tensor header");
    m.resize(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      if (!std::getline(in_, line)) throw IoError("checkpoint: truncated tensor " + name);
      const char* p = line.c_str();
      char* end = nullptr;
      for (Index j = 0; j < cols; ++j) {
        m(i, j) = std::strtod(p, &end);
        if (end == p) throw IoError("checkpoint: bad value in tensor " + name);
        p = end;
      }
    }
    return true;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(const std::string& path, const MlpParams& params, const ProjectionHead& head,
                     const RehearsalBuffer* buffer) {
  json header;
  json spec;
  spec["input_dim"] = params.spec.input_dim;
  spec["hidden_dims"] = params.spec.hidden_dims;
  spec["num_classes"] = params.spec.num_classes;
  spec["activation"] = activation_name(params.spec.activation);
  header["spec"] = spec;
  header["init"] = {{"seed", params.init.seed}, {"scheme", params.init.scheme}};
  header["head"] = {{"dim", head.dim()}, {"activation", activation_name(head.activation)}};
  if (buffer != nullptr) {
    bool has_logits = !buffer->entries().empty() && buffer->entries().front().logits.has_value();
    header["buffer"] = {{"capacity", buffer->capacity()},
                        {"observed", buffer->observed()},
                        {"count", buffer->size()},
                        {"has_logits", has_logits},
                        {"rng_seed", buffer->rng().seed()},
                        {"rng_counter", buffer->rng().counter()}};
  } else {
    header["buffer"] = nullptr;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out << kMagic << '\n' << header.dump() << '\n';

  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    write_tensor(out, "net.w" + std::to_string(i), params.weights[i]);
    write_tensor(out, "net.b" + std::to_string(i), params.biases[i].transpose());
  }
  write_tensor(out, "head.w1", head.w1);
  write_tensor(out, "head.b1", head.b1.transpose());
  write_tensor(out, "head.w2", head.w2);
  write_tensor(out, "head.b2", head.b2.transpose());

  if (buffer != nullptr && !buffer->entries().empty()) {
    const auto& entries = buffer->entries();
    const Index n = static_cast<Index>(entries.size());
    Matrix x(n, entries.front().x.size());
    Matrix meta(n, 3);  // y, task_id, insertion_index
    for (Index i = 0; i < n; ++i) {
      const BufferEntry& e = entries[static_cast<std::size_t>(i)];
      x.row(i) = e.x.transpose();
      meta(i, 0) = e.y;
      meta(i, 1) = e.task_id;
      meta(i, 2) = static_cast<double>(e.insertion_index);
    }
    write_tensor(out, "buffer.x", x);
    write_tensor(out, "buffer.meta", meta);
    if (entries.front().logits.has_value()) {
      Matrix logits(n, entries.front().logits->size());
      for (Index i = 0; i < n; ++i) {
        logits.row(i) = entries[static_cast<std::size_t>(i)].logits->transpose();
      }
      write_tensor(out, "buffer.logits", logits);
    }
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw IoError("checkpoint: bad magic in " + path);
  }
  if (!std::getline(in, line)) throw IoError("checkpoint: missing header in " + path);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw IoError("checkpoint: bad header json: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  const json& spec = header.at("spec");
  ckpt.params.spec.input_dim = spec.at("input_dim").get<Index>();
  ckpt.params.spec.hidden_dims = spec.at("hidden_dims").get<std::vector<Index>>();
  ckpt.params.spec.num_classes = spec.at("num_classes").get<Index>();
  ckpt.params.spec.activation = activation_from(spec.at("activation").get<std::string>());
  ckpt.params.init.seed = header.at("init").at("seed").get<std::uint64_t>();
  ckpt.params.init.scheme = header.at("init").at("scheme").get<std::string>();
  ckpt.head.activation = activation_from(header.at("head").at("activation").get<std::string>());

  std::map<std::string, Matrix> tensors;
  TensorReader reader(in);
  std::string name;
  Matrix m;
  while (reader.next(name, m)) tensors[name] = m;

  auto take = [&](const std::string& key) -> Matrix {
    auto it = tensors.find(key);
    if (it == tensors.end()) throw IoError("checkpoint: missing tensor " + key);
    return it->second;
  };

  const std::size_t n_layers = ckpt.params.spec.hidden_dims.size() + 1;
  for (std::size_t i = 0; i < n_layers; ++i) {
    ckpt.params.weights.push_back(take("net.w" + std::to_string(i)));
    ckpt.params.biases.push_back(take("net.b" + std::to_string(i)).row(0).transpose());
  }
  ckpt.head.w1 = take("head.w1");
  ckpt.head.b1 = take("head.b1").row(0).transpose();
  ckpt.head.w2 = take("head.w2");
  ckpt.head.b2 = take("head.b2").row(0).transpose();

  if (!header.at("buffer").is_null()) {
    const json& b = header.at("buffer");
    std::vector<BufferEntry> entries;
    const auto count = b.at("count").get<std::size_t>();
    if (count > 0) {
      Matrix x = take("buffer.x");
      Matrix meta = take("buffer.meta");
      const bool has_logits = b.at("has_logits").get<bool>();
      Matrix logits;
      if (has_logits) logits = take("buffer.logits");
      for (Index i = 0; i < static_cast<Index>(count); ++i) {
        BufferEntry e;
        e.x = x.row(i).transpose();
        e.y = static_cast<int>(meta(i, 0));
        e.task_id = static_cast<int>(meta(i, 1));
        e.insertion_index = static_cast<std::uint64_t>(meta(i, 2));
        if (has_logits) e.logits = logits.row(i).transpose();
        entries.push_back(std::move(e));
      }
    }
    ckpt.buffer = RehearsalBuffer::restore(
        b.at("capacity").get<std::size_t>(), std::move(entries),
        b.at("observed").get<std::uint64_t>(),
        RngState::restore(b.at("rng_seed").get<std::uint64_t>(),
                          b.at("rng_counter").get<std::uint64_t>()));
  }
  return ckpt;
}

}  // namespace dualhsic
