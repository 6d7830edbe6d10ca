#pragma once

// Feedforward classifier h = g(f(x)) with L hidden layers, a two-layer
// projection head, and manual backpropagation. backward() accepts gradients
// injected at any post-activation output Z_j, which is how the HSIC surrogate
// terms couple into training.

#include <cstdint>
#include <string>
#include <vector>

#include "dualhsic/numerics.hpp"
#include "dualhsic/rng.hpp"

namespace dualhsic {

enum class Activation { relu, tanh };

struct MlpSpec {
  Index input_dim = 0;
  std::vector<Index> hidden_dims;  // d_{z_1} .. d_{z_L}, L >= 1
  Index num_classes = 0;
  Activation activation = Activation::relu;

  Index num_layers() const { return static_cast<Index>(hidden_dims.size()); }
  Index latent_dim() const { return hidden_dims.back(); }  // d_{z_L}
  void validate() const;
};

struct InitRecord {
  std::uint64_t seed = 0;
  std::string scheme;
};

struct MlpParams {
  MlpSpec spec;
  std::vector<Matrix> weights;  // L encoder layers then the classifier, each (in x out)
  std::vector<Vector> biases;
  InitRecord init;
};

// Two-layer perceptron dim -> 4*dim -> dim sharing the encoder's activation.
struct ProjectionHead {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  Activation activation = Activation::relu;
  Index dim() const { return w1.rows(); }
};

struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre;  // pre-activations A_1..A_L
  std::vector<Matrix> z;    // activations Z_1..Z_L
  Matrix logits;
};

struct ParamGrads {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

struct HeadGrads {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

// Gradient injected at the post-activation output of hidden layer `layer`
// (1-based, matching Z_1..Z_L).
struct HiddenGrad {
  int layer = 0;
  Matrix grad;
};

// Fan-in-scaled uniform initialization (He-style gain for relu), zero biases.
MlpParams init_mlp(const MlpSpec& spec, std::uint64_t seed);
ProjectionHead init_projection_head(Index dim, Activation activation, std::uint64_t seed);

ForwardTrace forward(const MlpParams& params, const Eigen::Ref<const Matrix>& x);

// dLoss/dtheta for any scalar loss whose gradient at the logits is
// `grad_logits` and whose gradients at hidden outputs are listed in
// `grad_hidden`; injected gradients add to the chain-rule flow at Z_layer.
ParamGrads backward(const MlpParams& params, const ForwardTrace& trace,
                    const Eigen::Ref<const Matrix>& grad_logits,
                    const std::vector<HiddenGrad>& grad_hidden = {});

Matrix project(const ProjectionHead& head, const Eigen::Ref<const Matrix>& z);

// Backprop through the head: accumulates parameter gradients into `grads`
// (which must be zero-initialized or hold a prior accumulation) and returns
// dLoss/dz.
Matrix project_backward(const ProjectionHead& head, const Eigen::Ref<const Matrix>& z,
                        const Eigen::Ref<const Matrix>& grad_out, HeadGrads& grads);

HeadGrads zero_head_grads(const ProjectionHead& head);
ParamGrads zero_param_grads(const MlpParams& params);

// theta <- theta - lr * grad. Throws DivergenceError on non-finite gradients.
void sgd_step(MlpParams& params, const ParamGrads& grads, double lr);
void sgd_step(ProjectionHead& head, const HeadGrads& grads, double lr);

// Momentum variant: velocity <- m * velocity + grad; theta <- theta - lr * velocity.
struct SgdMomentumState {
  ParamGrads velocity;
  HeadGrads head_velocity;
};
void sgd_step(MlpParams& params, const ParamGrads& grads, double lr, double momentum,
              ParamGrads& velocity);

Matrix apply_activation(Activation act, const Eigen::Ref<const Matrix>& a);
Matrix activation_derivative(Activation act, const Eigen::Ref<const Matrix>& pre);

}  // namespace dualhsic
