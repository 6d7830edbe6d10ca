#include "dualhsic/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace dualhsic {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Drops a trailing comment unless the '#' sits inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "mlp.input_dim", "mlp.hidden_dims", "mlp.num_classes", "mlp.activation",
      "dualhsic.lambda_x", "dualhsic.lambda_y", "dualhsic.lambda_ha", "dualhsic.hbr_layers",
      "dualhsic.ha_target", "dualhsic.kernel_x.sigma", "dualhsic.kernel_x.kind",
      "dualhsic.kernel_y.sigma", "dualhsic.kernel_y.kind", "dualhsic.kernel_z.sigma",
      "dualhsic.kernel_z.kind",
      "data.kind", "data.num_tasks", "data.classes_per_task", "data.samples_per_class",
      "data.dim", "data.spread", "data.path", "data.normalize", "data.seed",
      "train.base", "train.buffer_capacity", "train.epochs_per_task", "train.batch_size",
      "train.lr", "train.momentum", "train.derpp_alpha", "train.derpp_beta",
      "train.eval_cadence", "train.head_reset_per_task", "train.insert_every_epoch",
      "run.seed", "run.seeds", "run.name", "io.out_dir", "io.save_checkpoint"};
  return keys;
}

}  // namespace

bool ConfigMap::is_known_key(const std::string& key) { return known_keys().count(key) > 0; }

void ConfigMap::set(const std::string& key, const std::string& raw_value) {
  if (!is_known_key(key)) throw ConfigError("config: unknown key '" + key + "'");
  values_[key] = raw_value;
}

void ConfigMap::apply_override(const std::string& dotted_kv) {
  const std::size_t eq = dotted_kv.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + dotted_kv + "' is not of the form key=value");
  }
  set(trim(dotted_kv.substr(0, eq)), trim(dotted_kv.substr(eq + 1)));
}

ConfigMap ConfigMap::from_string(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    cfg.set(key, trim(line.substr(eq + 1)));
  }
  return cfg;
}

ConfigMap ConfigMap::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream body;
  body << in.rdbuf();
  return from_string(body.str());
}

double ConfigMap::get_double(const std::string& key, double def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has non-numeric value '" + it->second + "'");
  }
}

std::int64_t ConfigMap::get_int(const std::string& key, std::int64_t def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has non-integer value '" + it->second + "'");
  }
}

std::uint64_t ConfigMap::get_uint64(const std::string& key, std::uint64_t def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has non-integer value '" + it->second + "'");
  }
}

bool ConfigMap::get_bool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw ConfigError("config: key '" + key + "' must be true or false, got '" + it->second + "'");
}

std::string ConfigMap::get_string(const std::string& key, const std::string& def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  return unquote(it->second);
}

namespace {

std::vector<std::string> split_list(const std::string& raw, const std::string& key) {
  std::string body = trim(raw);
  if (!body.empty() && body.front() == '[') {
    if (body.back() != ']') throw ConfigError("config: key '" + key + "': unterminated list");
    body = body.substr(1, body.size() - 2);
  }
  std::vector<std::string> items;
  std::stringstream ss(body);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    cell = trim(cell);
    if (!cell.empty()) items.push_back(cell);
  }
  return items;
}

}  // namespace

std::vector<std::int64_t> ConfigMap::get_int_list(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return {};
  std::vector<std::int64_t> out;
  for (const std::string& cell : split_list(it->second, key)) {
    try {
      out.push_back(std::stoll(cell));
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' has non-integer list item '" + cell + "'");
    }
  }
  return out;
}

std::vector<std::uint64_t> ConfigMap::get_uint64_list(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return {};
  std::vector<std::uint64_t> out;
  for (const std::string& cell : split_list(it->second, key)) {
    try {
      out.push_back(std::stoull(cell));
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "' has non-integer list item '" + cell + "'");
    }
  }
  return out;
}

namespace {

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw ConfigError("config: unknown activation '" + s + "'");
}

KernelKind kernel_kind_from_name(const std::string& s) {
  if (s == "gaussian") return KernelKind::gaussian;
  if (s == "linear") return KernelKind::linear;
  throw ConfigError("config: unknown kernel kind '" + s + "'");
}

KernelConfig kernel_from(const ConfigMap& cfg, const std::string& prefix) {
  KernelConfig k;
  k.sigma = cfg.get_double(prefix + ".sigma", 5.0);
  k.kind = kernel_kind_from_name(cfg.get_string(prefix + ".kind", "gaussian"));
  return k;
}

}  // namespace

ExperimentConfig experiment_config_from(const ConfigMap& cfg) {
  ExperimentConfig ec;

  ec.mlp.input_dim = static_cast<Index>(cfg.get_int("mlp.input_dim", 20));
  ec.mlp.num_classes = static_cast<Index>(cfg.get_int("mlp.num_classes", 10));
  ec.mlp.activation = activation_from_name(cfg.get_string("mlp.activation", "relu"));
  ec.mlp.hidden_dims.clear();
  if (cfg.contains("mlp.hidden_dims")) {
    for (std::int64_t d : cfg.get_int_list("mlp.hidden_dims")) {
      ec.mlp.hidden_dims.push_back(static_cast<Index>(d));
    }
  } else {
    ec.mlp.hidden_dims = {64, 64};
  }

  ec.dualhsic.lambda_x = cfg.get_double("dualhsic.lambda_x", 0.001);
  ec.dualhsic.lambda_y = cfg.get_double("dualhsic.lambda_y", 0.05);
  ec.dualhsic.lambda_ha = cfg.get_double("dualhsic.lambda_ha", -0.75);
  if (cfg.contains("dualhsic.hbr_layers")) {
    ec.dualhsic.hbr_layers.clear();
    for (std::int64_t j : cfg.get_int_list("dualhsic.hbr_layers")) {
      ec.dualhsic.hbr_layers.push_back(static_cast<int>(j));
    }
  } else {
    for (int j = 1; j <= static_cast<int>(ec.mlp.hidden_dims.size()); ++j) {
      ec.dualhsic.hbr_layers.push_back(j);  // multi-layered bottleneck by default
    }
  }
  const std::string target = cfg.get_string("dualhsic.ha_target", "buffer_only");
  if (target == "buffer_only") {
    ec.dualhsic.ha_target = HbrApplication::buffer_only;
  } else if (target == "current_only") {
    ec.dualhsic.ha_target = HbrApplication::current_only;
  } else if (target == "both") {
    ec.dualhsic.ha_target = HbrApplication::both;
  } else {
    throw ConfigError("config: dualhsic.ha_target must be buffer_only|current_only|both");
  }
  ec.dualhsic.kernel_x = kernel_from(cfg, "dualhsic.kernel_x");
  ec.dualhsic.kernel_y = kernel_from(cfg, "dualhsic.kernel_y");
  ec.dualhsic.kernel_z = kernel_from(cfg, "dualhsic.kernel_z");

  const std::string kind = cfg.get_string("data.kind", "blobs");
  if (kind == "blobs") {
    ec.data.kind = DataConfig::Kind::blobs;
  } else if (kind == "idx") {
    ec.data.kind = DataConfig::Kind::idx;
  } else if (kind == "csv") {
    ec.data.kind = DataConfig::Kind::csv;
  } else {
    throw ConfigError("config: data.kind must be blobs|idx|csv");
  }
  ec.data.num_tasks = static_cast<int>(cfg.get_int("data.num_tasks", 5));
  ec.data.classes_per_task = static_cast<int>(cfg.get_int("data.classes_per_task", 2));
  ec.data.samples_per_class = static_cast<int>(cfg.get_int("data.samples_per_class", 250));
  ec.data.dim = static_cast<Index>(cfg.get_int("data.dim", 20));
  ec.data.spread = cfg.get_double("data.spread", 1.0);
  ec.data.path = cfg.get_string("data.path", "");
  ec.data.normalize = cfg.get_bool("data.normalize", true);
  if (cfg.contains("data.seed")) ec.data.seed = cfg.get_uint64("data.seed", 0);

  const std::string base = cfg.get_string("train.base", "er");
  if (base == "er") {
    ec.base = BaseMethod::er;
  } else if (base == "derpp") {
    ec.base = BaseMethod::derpp;
  } else {
    throw ConfigError("config: train.base must be er|derpp");
  }
  ec.buffer_capacity = static_cast<std::size_t>(cfg.get_int("train.buffer_capacity", 50));
  ec.epochs_per_task = static_cast<int>(cfg.get_int("train.epochs_per_task", 10));
  ec.batch_size = static_cast<Index>(cfg.get_int("train.batch_size", 32));
  ec.lr = cfg.get_double("train.lr", 0.05);
  ec.momentum = cfg.get_double("train.momentum", 0.0);
  ec.derpp_alpha = cfg.get_double("train.derpp_alpha", 0.5);
  ec.derpp_beta = cfg.get_double("train.derpp_beta", 0.5);
  const std::string cadence = cfg.get_string("train.eval_cadence", "task_end");
  if (cadence == "task_end") {
    ec.eval_cadence = EvalCadence::task_end;
  } else if (cadence == "every_epoch") {
    ec.eval_cadence = EvalCadence::every_epoch;
  } else {
    throw ConfigError("config: train.eval_cadence must be task_end|every_epoch");
  }
  ec.head_reset_per_task = cfg.get_bool("train.head_reset_per_task", false);
  ec.insert_every_epoch = cfg.get_bool("train.insert_every_epoch", false);
  ec.seed = cfg.get_uint64("run.seed", 0);

  ec.validate();
  return ec;
}

std::vector<std::uint64_t> seeds_from(const ConfigMap& cfg) {
  if (cfg.contains("run.seeds")) {
    std::vector<std::uint64_t> seeds = cfg.get_uint64_list("run.seeds");
    if (seeds.empty()) throw ConfigError("config: run.seeds is empty");
    return seeds;
  }
  return {cfg.get_uint64("run.seed", 0)};
}

std::string run_name_from(const ConfigMap& cfg) { return cfg.get_string("run.name", "results"); }

}  // namespace dualhsic
