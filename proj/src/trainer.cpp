#include "dualhsic/trainer.hpp"

#include <chrono>
#include <cmath>

#include "dualhsic/hsic.hpp"

namespace dualhsic {

void ExperimentConfig::validate() const {
  mlp.validate();
  dualhsic.validate(mlp.num_layers());
  if (epochs_per_task < 1) throw ConfigError("ExperimentConfig: epochs_per_task must be >= 1");
  if (batch_size < 1) throw ConfigError("ExperimentConfig: batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("ExperimentConfig: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("ExperimentConfig: momentum must be in [0, 1)");
  }
  if (data.kind == DataConfig::Kind::blobs) {
    if (data.num_tasks < 1 || data.classes_per_task < 1 || data.samples_per_class < 1 ||
        data.dim < 1) {
      throw ConfigError("ExperimentConfig: blob dataset counts must be >= 1");
    }
  } else if (data.path.empty()) {
    throw ConfigError("ExperimentConfig: data.path required for idx/csv datasets");
  }
}

double AccuracyMatrix::at(int t, int tau) const {
  if (t < 1 || t > tasks() || tau < 1 || tau > t) {
    throw ConfigError("AccuracyMatrix: index (" + std::to_string(t) + "," + std::to_string(tau) +
                      ") outside the lower triangle");
  }
  return rows[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(tau - 1)];
}

void AccuracyMatrix::push_row(std::vector<double> row) {
  if (row.size() != rows.size() + 1) {
    throw ConfigError("AccuracyMatrix: row " + std::to_string(rows.size() + 1) + " must have " +
                      std::to_string(rows.size() + 1) + " entries");
  }
  for (double v : row) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("AccuracyMatrix: accuracy outside [0,1]");
  }
  rows.push_back(std::move(row));
}

double average_accuracy(const AccuracyMatrix& s, int t) {
  if (t < 1 || t > s.tasks()) throw ConfigError("average_accuracy: row " + std::to_string(t));
  double sum = 0.0;
  for (int tau = 1; tau <= t; ++tau) sum += s.at(t, tau);
  return sum / static_cast<double>(t);
}

double forgetting(const AccuracyMatrix& s, int t) {
  if (t < 2) throw ConfigError("forgetting: undefined for t < 2");
  if (t > s.tasks()) throw ConfigError("forgetting: row " + std::to_string(t) + " not present");
  double sum = 0.0;
  for (int tau = 1; tau <= t - 1; ++tau) {
    double best = s.at(tau, tau);
    for (int tp = tau + 1; tp <= t - 1; ++tp) best = std::max(best, s.at(tp, tau));
    sum += best - s.at(t, tau);
  }
  return sum / static_cast<double>(t - 1);
}

TaskStream build_stream(const ExperimentConfig& cfg) {
  TaskStream stream;
  switch (cfg.data.kind) {
    case DataConfig::Kind::blobs: {
      RngState data_rng = cfg.data.seed.has_value() ? RngState(*cfg.data.seed)
                                                    : RngState(cfg.seed).split(kStreamData);
      stream = make_split_blobs(cfg.data.num_tasks, cfg.data.classes_per_task,
                                cfg.data.samples_per_class, cfg.data.dim, cfg.data.spread,
                                data_rng);
      break;
    }
    case DataConfig::Kind::idx:
      stream = load_idx_dataset(cfg.data.path, cfg.data.num_tasks);
      break;
    case DataConfig::Kind::csv:
      stream = load_csv_dataset(cfg.data.path, cfg.data.num_tasks);
      break;
  }
  if (cfg.data.normalize) stream = normalize(std::move(stream));
  if (stream.dim != cfg.mlp.input_dim) {
    throw ConfigError("build_stream: data dim " + std::to_string(stream.dim) +
                      " != mlp input_dim " + std::to_string(cfg.mlp.input_dim));
  }
  return stream;
}

TrainerState make_initial_state(const ExperimentConfig& cfg) {
  cfg.validate();
  RngState root(cfg.seed);
  TrainerState state;
  state.params = init_mlp(cfg.mlp, root.split(kStreamNetInit).seed());
  state.head = init_projection_head(cfg.mlp.latent_dim(), cfg.mlp.activation,
                                    root.split(kStreamHeadInit).seed());
  state.buffer = RehearsalBuffer(cfg.buffer_capacity, root.split(kStreamReservoir));
  state.train_root = root.split(kStreamTrain);
  state.velocity = zero_param_grads(state.params);
  state.head_velocity = zero_head_grads(state.head);
  return state;
}

namespace {

struct BufferBatch {
  Matrix x;
  std::vector<int> y;
  Matrix stored_logits;  // only filled for derpp
};

BufferBatch gather(const std::vector<BufferEntry>& entries, bool want_logits, Index num_classes) {
  BufferBatch b;
  const Index n = static_cast<Index>(entries.size());
  b.x.resize(n, entries.front().x.size());
  b.y.reserve(entries.size());
  if (want_logits) b.stored_logits.resize(n, num_classes);
  for (Index i = 0; i < n; ++i) {
    const BufferEntry& e = entries[static_cast<std::size_t>(i)];
    b.x.row(i) = e.x.transpose();
    b.y.push_back(e.y);
    if (want_logits) {
      if (!e.logits.has_value()) {
        throw ConfigError("derpp replay needs stored logits; buffer entry has none");
      }
      b.stored_logits.row(i) = e.logits->transpose();
    }
  }
  return b;
}

void accumulate(ParamGrads& into, const ParamGrads& from) {
  for (std::size_t i = 0; i < into.weights.size(); ++i) {
    into.weights[i] += from.weights[i];
    into.biases[i] += from.biases[i];
  }
}

}  // namespace

void train_task(TrainerState& state, const TaskData& task, const ExperimentConfig& cfg,
                int task_index, std::vector<EpochLog>* epoch_log,
                std::vector<EpochEval>* epoch_evals, const TaskStream* stream) {
  if (task.train_x.rows() == 0) throw ConfigError("train_task: task has no training data");
  const Index n_train = task.train_x.rows();
  const Index L = cfg.mlp.num_layers();
  const bool use_hbr = cfg.dualhsic.hbr_enabled();
  const bool use_ha = cfg.dualhsic.ha_enabled();
  const bool hbr_on_buffer = use_hbr && cfg.dualhsic.ha_target != HbrApplication::current_only;
  const bool hbr_on_current = use_hbr && cfg.dualhsic.ha_target != HbrApplication::buffer_only;

  if (cfg.head_reset_per_task && task_index > 0) {
    state.head = init_projection_head(
        cfg.mlp.latent_dim(), cfg.mlp.activation,
        RngState(cfg.seed).split(kStreamHeadInit).split(static_cast<std::uint64_t>(task_index)).seed());
    state.head_velocity = zero_head_grads(state.head);
  }

  for (int e = 0; e < cfg.epochs_per_task; ++e) {
    RngState epoch_rng =
        state.train_root.split(static_cast<std::uint64_t>(task_index) * 1000000ULL +
                               static_cast<std::uint64_t>(e));
    RngState shuffle_rng = epoch_rng.split(0);
    RngState draw_rng = epoch_rng.split(1);
    std::vector<Index> order = random_permutation(n_train, shuffle_rng);

    LossBreakdown epoch_sum;
    int batches = 0;
    const bool insert_this_epoch = (e == 0) || cfg.insert_every_epoch;

    for (Index start = 0; start < n_train; start += cfg.batch_size) {
      const Index bsz = std::min<Index>(cfg.batch_size, n_train - start);
      Matrix x_cur(bsz, task.train_x.cols());
      std::vector<int> y_cur(static_cast<std::size_t>(bsz));
      for (Index i = 0; i < bsz; ++i) {
        const Index row = order[static_cast<std::size_t>(start + i)];
        x_cur.row(i) = task.train_x.row(row);
        y_cur[static_cast<std::size_t>(i)] = task.train_y[static_cast<std::size_t>(row)];
      }

      ForwardTrace trace_cur = forward(state.params, x_cur);
      CrossEntropyResult ce_cur = cross_entropy(trace_cur.logits, y_cur);

      LossParts parts;
      parts.base_cl = ce_cur.value;
      parts.grad_logits_current = ce_cur.grad_logits;

      std::optional<BufferBatch> buf_batch;
      std::optional<ForwardTrace> trace_buf;
      if (!state.buffer.empty()) {
        buf_batch = gather(state.buffer.sample(static_cast<std::size_t>(bsz), draw_rng),
                           cfg.base == BaseMethod::derpp, cfg.mlp.num_classes);
        trace_buf = forward(state.params, buf_batch->x);
        if (cfg.base == BaseMethod::derpp) {
          DerppResult dr = der_pp_buffer_loss(trace_buf->logits, buf_batch->stored_logits,
                                              buf_batch->y, cfg.derpp_alpha, cfg.derpp_beta);
          parts.base_cl += dr.value;
          parts.grad_logits_buffer = std::move(dr.grad_logits);
        } else {
          CrossEntropyResult ce_buf = cross_entropy(trace_buf->logits, buf_batch->y);
          parts.base_cl += ce_buf.value;
          parts.grad_logits_buffer = std::move(ce_buf.grad_logits);
        }
      }

      // HSIC terms need at least two samples to center a kernel.
      if (hbr_on_buffer && trace_buf && buf_batch->x.rows() >= 2) {
        parts.hbr_buffer = hbr_loss(*trace_buf, buf_batch->x,
                                    one_hot(buf_batch->y, cfg.mlp.num_classes), cfg.dualhsic);
      }
      if (hbr_on_current && bsz >= 2) {
        parts.hbr_current =
            hbr_loss(trace_cur, x_cur, one_hot(y_cur, cfg.mlp.num_classes), cfg.dualhsic);
      }
      if (use_ha && trace_buf && bsz >= 2) {
        parts.ha = ha_loss(trace_buf->z.back(), trace_cur.z.back(), state.head,
                           cfg.dualhsic.lambda_ha, cfg.dualhsic.kernel_z);
      }

      LossReport report = total_loss(std::move(parts), static_cast<int>(L));
      if (!std::isfinite(report.breakdown.total)) {
        throw DivergenceError("train_task: non-finite loss at task " +
                              std::to_string(task_index + 1) + " epoch " + std::to_string(e + 1));
      }

      ParamGrads grads =
          backward(state.params, trace_cur, report.grad_logits_current, report.hidden_current);
      if (trace_buf) {
        accumulate(grads, backward(state.params, *trace_buf, report.grad_logits_buffer,
                                   report.hidden_buffer));
      }
      sgd_step(state.params, grads, cfg.lr, cfg.momentum, state.velocity);
      if (report.has_head_grads) {
        if (cfg.momentum > 0.0) {
          state.head_velocity.w1 = cfg.momentum * state.head_velocity.w1 + report.head.w1;
          state.head_velocity.b1 = cfg.momentum * state.head_velocity.b1 + report.head.b1;
          state.head_velocity.w2 = cfg.momentum * state.head_velocity.w2 + report.head.w2;
          state.head_velocity.b2 = cfg.momentum * state.head_velocity.b2 + report.head.b2;
          sgd_step(state.head, state.head_velocity, cfg.lr);
        } else {
          sgd_step(state.head, report.head, cfg.lr);
        }
      }

      if (insert_this_epoch) {
        for (Index i = 0; i < bsz; ++i) {
          BufferEntry entry;
          entry.x = x_cur.row(i).transpose();
          entry.y = y_cur[static_cast<std::size_t>(i)];
          entry.task_id = task_index;
          if (cfg.base == BaseMethod::derpp) {
            entry.logits = trace_cur.logits.row(i).transpose();
          }
          state.buffer.observe(std::move(entry));
        }
      }

      epoch_sum.total += report.breakdown.total;
      epoch_sum.base_cl += report.breakdown.base_cl;
      epoch_sum.hbr_x += report.breakdown.hbr_x;
      epoch_sum.hbr_y += report.breakdown.hbr_y;
      epoch_sum.ha += report.breakdown.ha;
      ++batches;
    }

    if (epoch_log != nullptr) {
      EpochLog log;
      log.task = task_index + 1;
      log.epoch = e + 1;
      log.batches = batches;
      const double inv = 1.0 / static_cast<double>(batches);
      log.mean_loss = {epoch_sum.total * inv, epoch_sum.base_cl * inv, epoch_sum.hbr_x * inv,
                       epoch_sum.hbr_y * inv, epoch_sum.ha * inv};
      epoch_log->push_back(log);
    }
    if (cfg.eval_cadence == EvalCadence::every_epoch && epoch_evals != nullptr &&
        stream != nullptr) {
      std::vector<double> accs = evaluate(state.params, *stream, task_index);
      double mean = 0.0;
      for (double a : accs) mean += a;
      mean /= static_cast<double>(accs.size());
      epoch_evals->push_back({task_index + 1, e + 1, mean});
    }
  }
  state.tasks_trained = task_index + 1;
}

std::vector<double> evaluate(const MlpParams& params, const TaskStream& stream, int through_task) {
  if (through_task < 0 || through_task >= stream.num_tasks()) {
    throw ConfigError("evaluate: task index out of range");
  }
  std::vector<double> accs;
  for (int tau = 0; tau <= through_task; ++tau) {
    const TaskData& task = stream.tasks[static_cast<std::size_t>(tau)];
    if (task.test_x.rows() == 0) {
      accs.push_back(0.0);
      continue;
    }
    ForwardTrace trace = forward(params, task.test_x);
    Index correct = 0;
    for (Index i = 0; i < trace.logits.rows(); ++i) {
      Index best = 0;
      double best_v = trace.logits(i, 0);
      for (Index c = 1; c < trace.logits.cols(); ++c) {
        if (trace.logits(i, c) > best_v) {  // strict: ties go to the lowest index
          best_v = trace.logits(i, c);
          best = c;
        }
      }
      if (static_cast<int>(best) == task.test_y[static_cast<std::size_t>(i)]) ++correct;
    }
    accs.push_back(static_cast<double>(correct) / static_cast<double>(trace.logits.rows()));
  }
  return accs;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentOutput out;
  out.stream = build_stream(cfg);
  out.state = make_initial_state(cfg);
  out.result.seed = cfg.seed;

  using clock = std::chrono::steady_clock;
  for (int t = 0; t < out.stream.num_tasks(); ++t) {
    const auto t0 = clock::now();
    train_task(out.state, out.stream.tasks[static_cast<std::size_t>(t)], cfg, t,
               &out.result.epochs, &out.result.epoch_evals, &out.stream);
    const auto t1 = clock::now();
    out.result.S.push_row(evaluate(out.state.params, out.stream, t));
    const auto t2 = clock::now();
    out.result.seconds_train += std::chrono::duration<double>(t1 - t0).count();
    out.result.seconds_eval += std::chrono::duration<double>(t2 - t1).count();
  }

  const int T = out.stream.num_tasks();
  out.result.final_average_accuracy = average_accuracy(out.result.S, T);
  if (T >= 2) out.result.final_forgetting = forgetting(out.result.S, T);
  return out;
}

}  // namespace dualhsic
