#include "dualhsic/network.hpp"

#include <cmath>
#include <limits>

#include "doctest.h"
#include "dualhsic/data.hpp"
#include "dualhsic/losses.hpp"
#include "test_support.hpp"

using namespace dualhsic;
using dualhsic::testing::finite_diff;
using dualhsic::testing::finite_diff_cell;
using dualhsic::testing::random_gaussian;
using dualhsic::testing::rel_error;

namespace {

MlpParams zero_params(const MlpSpec& spec) {
  MlpParams p = init_mlp(spec, 0);
  for (Matrix& w : p.weights) w.setZero();
  for (Vector& b : p.biases) b.setZero();
  return p;
}

// Flattened view over every parameter cell, for finite differencing.
std::vector<double*> param_cells(MlpParams& p) {
  std::vector<double*> cells;
  for (Matrix& w : p.weights) {
    for (Index i = 0; i < w.size(); ++i) cells.push_back(w.data() + i);
  }
  for (Vector& b : p.biases) {
    for (Index i = 0; i < b.size(); ++i) cells.push_back(b.data() + i);
  }
  return cells;
}

std::vector<double> grad_cells(const ParamGrads& g) {
  std::vector<double> cells;
  for (const Matrix& w : g.weights) {
    for (Index i = 0; i < w.size(); ++i) cells.push_back(*(w.data() + i));
  }
  for (const Vector& b : g.biases) {
    for (Index i = 0; i < b.size(); ++i) cells.push_back(*(b.data() + i));
  }
  return cells;
}

}  // namespace

TEST_CASE("zero network maps everything to zero") {
  MlpSpec spec{3, {4, 4}, 2, Activation::relu};
  MlpParams p = zero_params(spec);
  RngState rng(1);
  Matrix x = random_gaussian(rng, 5, 3);
  ForwardTrace t = forward(p, x);
  CHECK(t.z[0].norm() == 0.0);
  CHECK(t.z[1].norm() == 0.0);
  CHECK(t.logits.norm() == 0.0);
}

TEST_CASE("identity layer passes nonnegative input through") {
  MlpSpec spec{3, {3}, 2, Activation::relu};
  MlpParams p = zero_params(spec);
  p.weights[0] = Matrix::Identity(3, 3);
  RngState rng(2);
  Matrix x = testing::random_uniform(rng, 4, 3, 0.0, 2.0);
  ForwardTrace t = forward(p, x);
  CHECK((t.z[0] - x).norm() == 0.0);
}

TEST_CASE("forward rejects wrong input width") {
  MlpSpec spec{3, {4}, 2, Activation::relu};
  MlpParams p = init_mlp(spec, 0);
  CHECK_THROWS_AS(forward(p, Matrix::Zero(2, 5)), ShapeError);
}

TEST_CASE("forward is deterministic bit for bit") {
  MlpSpec spec{4, {8, 8}, 3, Activation::tanh};
  MlpParams p = init_mlp(spec, 7);
  RngState rng(3);
  Matrix x = random_gaussian(rng, 6, 4);
  ForwardTrace a = forward(p, x);
  ForwardTrace b = forward(p, x);
  CHECK((a.logits - b.logits).norm() == 0.0);
  for (std::size_t j = 0; j < a.z.size(); ++j) CHECK((a.z[j] - b.z[j]).norm() == 0.0);
}

TEST_CASE("init is seed-reproducible and seed-sensitive") {
  MlpSpec spec{4, {8}, 3, Activation::relu};
  MlpParams a = init_mlp(spec, 11);
  MlpParams b = init_mlp(spec, 11);
  MlpParams c = init_mlp(spec, 12);
  CHECK((a.weights[0] - b.weights[0]).norm() == 0.0);
  CHECK((a.weights[0] - c.weights[0]).norm() != 0.0);
  CHECK(a.init.seed == 11);
  CHECK(a.init.scheme == "fan_in_uniform");
}

TEST_CASE("backward with zero upstream gradients returns zero") {
  MlpSpec spec{3, {4, 4}, 2, Activation::relu};
  MlpParams p = init_mlp(spec, 0);
  RngState rng(4);
  Matrix x = random_gaussian(rng, 5, 3);
  ForwardTrace t = forward(p, x);
  ParamGrads g = backward(p, t, Matrix::Zero(5, 2),
                          {{1, Matrix::Zero(5, 4)}, {2, Matrix::Zero(5, 4)}});
  for (const Matrix& w : g.weights) CHECK(w.norm() == 0.0);
  for (const Vector& b : g.biases) CHECK(b.norm() == 0.0);
}

TEST_CASE("cross-entropy backward matches finite differences") {
  MlpSpec spec{3, {5, 4}, 3, Activation::tanh};
  MlpParams p = init_mlp(spec, 5);
  RngState rng(6);
  Matrix x = random_gaussian(rng, 6, 3);
  std::vector<int> y = {0, 2, 1, 1, 0, 2};

  ForwardTrace t = forward(p, x);
  CrossEntropyResult ce = cross_entropy(t.logits, y);
  ParamGrads analytic = backward(p, t, ce.grad_logits);

  auto eval = [&]() { return cross_entropy(forward(p, x).logits, y).value; };
  std::vector<double*> cells = param_cells(p);
  std::vector<double> a = grad_cells(analytic);
  REQUIRE(a.size() == cells.size());
  double num2 = 0.0;
  double diff2 = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double fd = finite_diff_cell(eval, *cells[i]);
    diff2 += (fd - a[i]) * (fd - a[i]);
    num2 += fd * fd + a[i] * a[i];
  }
  CHECK(std::sqrt(diff2) / std::sqrt(num2) < 1e-4);
}

TEST_CASE("gradient injected at Z_1 leaves layer-2 weights untouched") {
  MlpSpec spec{3, {4, 4}, 2, Activation::relu};
  MlpParams p = init_mlp(spec, 1);
  RngState rng(7);
  Matrix x = random_gaussian(rng, 5, 3);
  ForwardTrace t = forward(p, x);
  Matrix inj = random_gaussian(rng, 5, 4);
  ParamGrads g = backward(p, t, Matrix::Zero(5, 2), {{1, inj}});
  CHECK(g.weights[1].norm() == 0.0);  // no downstream path from Z_1 to layer 2
  CHECK(g.weights[2].norm() == 0.0);
  CHECK(g.weights[0].norm() > 0.0);
}

TEST_CASE("backward validates injection sites") {
  MlpSpec spec{3, {4}, 2, Activation::relu};
  MlpParams p = init_mlp(spec, 1);
  ForwardTrace t = forward(p, Matrix::Zero(2, 3));
  CHECK_THROWS_AS(backward(p, t, Matrix::Zero(2, 2), {{2, Matrix::Zero(2, 4)}}), ShapeError);
  CHECK_THROWS_AS(backward(p, t, Matrix::Zero(2, 2), {{1, Matrix::Zero(3, 4)}}), ShapeError);
}

TEST_CASE("projection head shapes and zero cases") {
  ProjectionHead head = init_projection_head(6, Activation::relu, 3);
  CHECK(head.w1.rows() == 6);
  CHECK(head.w1.cols() == 24);
  CHECK(head.w2.rows() == 24);
  CHECK(head.w2.cols() == 6);

  RngState rng(8);
  Matrix z = random_gaussian(rng, 4, 6);
  ProjectionHead zero_head = head;
  zero_head.w1.setZero();
  zero_head.w2.setZero();
  CHECK(project(zero_head, z).norm() == 0.0);
  CHECK(project(head, Matrix::Zero(4, 6)).norm() == 0.0);  // zero input, zero biases
  CHECK_THROWS_AS(project(head, Matrix::Zero(4, 5)), ShapeError);
}

TEST_CASE("project_backward matches finite differences through the head") {
  ProjectionHead head = init_projection_head(3, Activation::tanh, 9);
  RngState rng(10);
  Matrix z = random_gaussian(rng, 5, 3);
  Matrix upstream = random_gaussian(rng, 5, 3);

  HeadGrads grads = zero_head_grads(head);
  Matrix dz = project_backward(head, z, upstream, grads);

  auto eval = [&]() { return (project(head, z).cwiseProduct(upstream)).sum(); };
  Matrix dz_fd = finite_diff(
      [&](const Matrix& zv) { return (project(head, zv).cwiseProduct(upstream)).sum(); }, z);
  CHECK(rel_error(dz, dz_fd) < 1e-6);

  double diff2 = 0.0;
  double num2 = 0.0;
  auto cell_check = [&](Matrix& w, const Matrix& g) {
    for (Index i = 0; i < w.size(); ++i) {
      const double fd = finite_diff_cell(eval, *(w.data() + i));
      const double a = *(g.data() + i);
      diff2 += (fd - a) * (fd - a);
      num2 += fd * fd + a * a;
    }
  };
  cell_check(head.w1, grads.w1);
  cell_check(head.w2, grads.w2);
  CHECK(std::sqrt(diff2) / std::sqrt(num2) < 1e-6);
}

TEST_CASE("sgd_step arithmetic") {
  MlpSpec spec{1, {1}, 1, Activation::relu};
  MlpParams p = zero_params(spec);
  p.weights[0](0, 0) = 3.0;

  ParamGrads zero = zero_param_grads(p);
  MlpParams before = p;
  sgd_step(p, zero, 0.5);
  CHECK(p.weights[0](0, 0) == before.weights[0](0, 0));

  ParamGrads g = zero_param_grads(p);
  g.weights[0](0, 0) = 2.0;
  sgd_step(p, g, 1.0);
  CHECK(p.weights[0](0, 0) == 1.0);

  // two half-steps with a held gradient equal one full step
  MlpParams a = p;
  MlpParams b = p;
  sgd_step(a, g, 0.05);
  sgd_step(a, g, 0.05);
  sgd_step(b, g, 0.1);
  CHECK(a.weights[0](0, 0) == doctest::Approx(b.weights[0](0, 0)).epsilon(1e-14));
}

TEST_CASE("sgd_step rejects non-finite gradients") {
  MlpSpec spec{1, {1}, 1, Activation::relu};
  MlpParams p = init_mlp(spec, 0);
  ParamGrads g = zero_param_grads(p);
  g.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sgd_step(p, g, 0.1), DivergenceError);
}

TEST_CASE("momentum-free path equals the plain update") {
  MlpSpec spec{2, {3}, 2, Activation::relu};
  MlpParams a = init_mlp(spec, 4);
  MlpParams b = a;
  ParamGrads g = zero_param_grads(a);
  g.weights[0].setConstant(0.25);
  ParamGrads vel = zero_param_grads(a);
  sgd_step(a, g, 0.1);
  sgd_step(b, g, 0.1, 0.0, vel);
  CHECK((a.weights[0] - b.weights[0]).norm() == 0.0);
}

// Frozen regression values for a seed-0 2-4-2 network on a fixed probe batch.
TEST_CASE("forward matches the frozen seed-0 regression values") {
  MlpSpec spec{2, {4}, 2, Activation::relu};
  MlpParams p = init_mlp(spec, 0);
  Matrix x(3, 2);
  x << 0.5, -1.0, 1.5, 0.25, -0.75, 2.0;
  Matrix expected(3, 2);
  expected << 0.26560024561333562, 0.58172276801619482,  //
      1.1687674457235222, 1.2140279683545279,            //
      1.1595678437436865, 1.368262433519281;
  ForwardTrace t = forward(p, x);
  CHECK((t.logits - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("project matches the frozen seed-3 regression values") {
  ProjectionHead head = init_projection_head(3, Activation::relu, 3);
  Matrix z(2, 3);
  z << 0.1, -0.2, 0.3, 1.0, 0.5, -0.5;
  Matrix expected(2, 3);
  expected << 0.38326806064935393, 0.014544273082660264, 0.014040430310028169,  //
      -0.46264322057053164, 1.4908494525855414, 0.36425364244688246;
  CHECK((project(head, z) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

// Plain cross-entropy training drives the loss monotonically down on an easy
// separable problem.
TEST_CASE("full-batch training decreases the loss for 50 steps") {
  TaskStream stream = make_split_blobs(1, 2, 40, 4, 0.5, RngState(21));
  stream = normalize(std::move(stream));
  const TaskData& task = stream.tasks[0];

  MlpSpec spec{4, {8}, 2, Activation::relu};
  MlpParams p = init_mlp(spec, 2);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 50; ++step) {
    ForwardTrace t = forward(p, task.train_x);
    CrossEntropyResult ce = cross_entropy(t.logits, task.train_y);
    CHECK(ce.value < prev);
    prev = ce.value;
    ParamGrads g = backward(p, t, ce.grad_logits);
    sgd_step(p, g, 0.05);
  }
}
