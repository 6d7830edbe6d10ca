#include "dualhsic/network.hpp"

#include <cmath>

namespace dualhsic {

void MlpSpec::validate() const {
  if (input_dim < 1) throw ConfigError("MlpSpec: input_dim must be >= 1");
  if (num_classes < 1) throw ConfigError("MlpSpec: num_classes must be >= 1");
  if (hidden_dims.empty()) throw ConfigError("MlpSpec: at least one hidden layer required");
  for (Index d : hidden_dims) {
    if (d < 1) throw ConfigError("MlpSpec: hidden dims must be >= 1");
  }
}

Matrix apply_activation(Activation act, const Eigen::Ref<const Matrix>& a) {
  if (act == Activation::relu) return a.cwiseMax(0.0);
  return a.array().tanh().matrix();
}

Matrix activation_derivative(Activation act, const Eigen::Ref<const Matrix>& pre) {
  if (act == Activation::relu) {
    return (pre.array() > 0.0).cast<double>().matrix();
  }
  Matrix t = pre.array().tanh().matrix();
  return (1.0 - t.array().square()).matrix();
}

namespace {

double init_gain(Activation act) {
  return act == Activation::relu ? std::sqrt(2.0) : 1.0;
}

// Kaiming-uniform: bound = gain * sqrt(3 / fan_in).
Matrix init_weight(Index fan_in, Index fan_out, double gain, RngState& rng) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  Matrix w(fan_in, fan_out);
  for (Index i = 0; i < fan_in; ++i) {
    for (Index j = 0; j < fan_out; ++j) {
      w(i, j) = bound * (2.0 * rng.next_double() - 1.0);
    }
  }
  return w;
}

}  // namespace

MlpParams init_mlp(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  MlpParams p;
  p.spec = spec;
  p.init = {seed, "fan_in_uniform"};
  RngState root(seed);
  const double gain = init_gain(spec.activation);
  Index in = spec.input_dim;
  for (std::size_t j = 0; j < spec.hidden_dims.size(); ++j) {
    const Index out = spec.hidden_dims[j];
    RngState layer_rng = root.split(j);
    p.weights.push_back(init_weight(in, out, gain, layer_rng));
    p.biases.push_back(Vector::Zero(out));
    in = out;
  }
  RngState cls_rng = root.split(spec.hidden_dims.size());
  p.weights.push_back(init_weight(in, spec.num_classes, 1.0, cls_rng));
  p.biases.push_back(Vector::Zero(spec.num_classes));
  return p;
}

ProjectionHead init_projection_head(Index dim, Activation activation, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("init_projection_head: dim must be >= 1");
  ProjectionHead h;
  h.activation = activation;
  RngState root(seed);
  const double gain = init_gain(activation);
  RngState r1 = root.split(0);
  RngState r2 = root.split(1);
  h.w1 = init_weight(dim, 4 * dim, gain, r1);
  h.b1 = Vector::Zero(4 * dim);
  h.w2 = init_weight(4 * dim, dim, 1.0, r2);
  h.b2 = Vector::Zero(dim);
  return h;
}

ForwardTrace forward(const MlpParams& params, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != params.spec.input_dim) {
    throw ShapeError("forward: input width " + std::to_string(x.cols()) + " != spec input_dim " +
                     std::to_string(params.spec.input_dim));
  }
  ForwardTrace t;
  t.input = x;
  const Index L = params.spec.num_layers();
  Matrix cur = x;
  for (Index j = 0; j < L; ++j) {
    Matrix pre = cur * params.weights[static_cast<std::size_t>(j)];
    pre.rowwise() += params.biases[static_cast<std::size_t>(j)].transpose();
    t.pre.push_back(pre);
    t.z.push_back(apply_activation(params.spec.activation, pre));
    cur = t.z.back();
  }
  t.logits = cur * params.weights[static_cast<std::size_t>(L)];
  t.logits.rowwise() += params.biases[static_cast<std::size_t>(L)].transpose();
  return t;
}

ParamGrads backward(const MlpParams& params, const ForwardTrace& trace,
                    const Eigen::Ref<const Matrix>& grad_logits,
                    const std::vector<HiddenGrad>& grad_hidden) {
  const Index L = params.spec.num_layers();
  if (grad_logits.rows() != trace.logits.rows() || grad_logits.cols() != trace.logits.cols()) {
    throw ShapeError("backward: grad_logits shape mismatch");
  }

  // Injected gradients indexed by layer, added at the activation output.
  std::vector<Matrix> injected(static_cast<std::size_t>(L));
  for (const HiddenGrad& g : grad_hidden) {
    if (g.layer < 1 || g.layer > L) {
      throw ShapeError("backward: injected layer index " + std::to_string(g.layer) +
                       " out of range 1.." + std::to_string(L));
    }
    const Matrix& z = trace.z[static_cast<std::size_t>(g.layer - 1)];
    if (g.grad.rows() != z.rows() || g.grad.cols() != z.cols()) {
      throw ShapeError("backward: injected gradient shape mismatch at layer " +
                       std::to_string(g.layer));
    }
    Matrix& slot = injected[static_cast<std::size_t>(g.layer - 1)];
    if (slot.size() == 0) {
      slot = g.grad;
    } else {
      slot += g.grad;
    }
  }

  ParamGrads grads = zero_param_grads(params);

  // Classifier layer.
  const Matrix& z_last = trace.z[static_cast<std::size_t>(L - 1)];
  grads.weights[static_cast<std::size_t>(L)] = z_last.transpose() * grad_logits;
  grads.biases[static_cast<std::size_t>(L)] = grad_logits.colwise().sum().transpose();
  Matrix dz = grad_logits * params.weights[static_cast<std::size_t>(L)].transpose();

  for (Index j = L - 1; j >= 0; --j) {
    if (injected[static_cast<std::size_t>(j)].size() != 0) {
      dz += injected[static_cast<std::size_t>(j)];
    }
    Matrix da =
        dz.cwiseProduct(activation_derivative(params.spec.activation, trace.pre[static_cast<std::size_t>(j)]));
    const Matrix& z_in = (j == 0) ? trace.input : trace.z[static_cast<std::size_t>(j - 1)];
    grads.weights[static_cast<std::size_t>(j)] = z_in.transpose() * da;
    grads.biases[static_cast<std::size_t>(j)] = da.colwise().sum().transpose();
    if (j > 0) dz = da * params.weights[static_cast<std::size_t>(j)].transpose();
  }
  return grads;
}

Matrix project(const ProjectionHead& head, const Eigen::Ref<const Matrix>& z) {
  if (z.cols() != head.dim()) {
    throw ShapeError("project: input width " + std::to_string(z.cols()) + " != head dim " +
                     std::to_string(head.dim()));
  }
  Matrix pre = z * head.w1;
  pre.rowwise() += head.b1.transpose();
  Matrix hid = apply_activation(head.activation, pre);
  Matrix out = hid * head.w2;
  out.rowwise() += head.b2.transpose();
  return out;
}

Matrix project_backward(const ProjectionHead& head, const Eigen::Ref<const Matrix>& z,
                        const Eigen::Ref<const Matrix>& grad_out, HeadGrads& grads) {
  Matrix pre = z * head.w1;
  pre.rowwise() += head.b1.transpose();
  Matrix hid = apply_activation(head.activation, pre);

  grads.w2 += hid.transpose() * grad_out;
  grads.b2 += grad_out.colwise().sum().transpose();
  Matrix dhid = grad_out * head.w2.transpose();
  Matrix dpre = dhid.cwiseProduct(activation_derivative(head.activation, pre));
  grads.w1 += z.transpose() * dpre;
  grads.b1 += dpre.colwise().sum().transpose();
  return dpre * head.w1.transpose();
}

HeadGrads zero_head_grads(const ProjectionHead& head) {
  HeadGrads g;
  g.w1 = Matrix::Zero(head.w1.rows(), head.w1.cols());
  g.b1 = Vector::Zero(head.b1.size());
  g.w2 = Matrix::Zero(head.w2.rows(), head.w2.cols());
  g.b2 = Vector::Zero(head.b2.size());
  return g;
}

ParamGrads zero_param_grads(const MlpParams& params) {
  ParamGrads g;
  for (const Matrix& w : params.weights) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const Vector& b : params.biases) g.biases.push_back(Vector::Zero(b.size()));
  return g;
}

namespace {

void check_finite(const ParamGrads& grads) {
  for (const Matrix& w : grads.weights) {
    if (!w.allFinite()) throw DivergenceError("sgd_step: non-finite weight gradient");
  }
  for (const Vector& b : grads.biases) {
    if (!b.allFinite()) throw DivergenceError("sgd_step: non-finite bias gradient");
  }
}

}  // namespace

void sgd_step(MlpParams& params, const ParamGrads& grads, double lr) {
  if (!(lr > 0.0)) throw ConfigError("sgd_step: learning rate must be positive");
  check_finite(grads);
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    params.weights[i] -= lr * grads.weights[i];
    params.biases[i] -= lr * grads.biases[i];
  }
}

void sgd_step(MlpParams& params, const ParamGrads& grads, double lr, double momentum,
              ParamGrads& velocity) {
  if (momentum == 0.0) {
    sgd_step(params, grads, lr);
    return;
  }
  if (!(lr > 0.0)) throw ConfigError("sgd_step: learning rate must be positive");
  check_finite(grads);
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    velocity.weights[i] = momentum * velocity.weights[i] + grads.weights[i];
    velocity.biases[i] = momentum * velocity.biases[i] + grads.biases[i];
    params.weights[i] -= lr * velocity.weights[i];
    params.biases[i] -= lr * velocity.biases[i];
  }
}

void sgd_step(ProjectionHead& head, const HeadGrads& grads, double lr) {
  if (!(lr > 0.0)) throw ConfigError("sgd_step: learning rate must be positive");
  if (!grads.w1.allFinite() || !grads.b1.allFinite() || !grads.w2.allFinite() ||
      !grads.b2.allFinite()) {
    throw DivergenceError("sgd_step: non-finite projection-head gradient");
  }
  head.w1 -= lr * grads.w1;
  head.b1 -= lr * grads.b1;
  head.w2 -= lr * grads.w2;
  head.b2 -= lr * grads.b2;
}

}  // namespace dualhsic
