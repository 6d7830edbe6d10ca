#pragma once

// Dense linear-algebra substrate. Batches are row-major matrices with one
// sample per row; all arithmetic is double precision with a fixed summation
// order so results replay bit-identically.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "dualhsic/errors.hpp"

namespace dualhsic {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

template <class A, class B>
Matrix matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + ")");
  }
  return a * b;
}

// D_ij = ||x_i - x_j||^2 via ||a||^2 + ||b||^2 - 2 a.b, clamped at zero so
// cancellation never produces a small negative distance. Diagonal is exact 0.
template <class Derived>
Matrix pairwise_sq_dists(const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() == 0) throw ShapeError("pairwise_sq_dists: empty batch");
  Vector sq = x.rowwise().squaredNorm();
  Matrix d = (-2.0 * (x * x.transpose())).eval();
  d.colwise() += sq;
  d.rowwise() += sq.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  // gemm is not bitwise symmetric across triangles; mirror the upper one
  d.triangularView<Eigen::StrictlyLower>() = d.transpose();
  return d;
}

// K - rowmeans - colmeans + grandmean, i.e. H K H with H = I - (1/n) 1 1^T,
// computed in O(n^2) without materializing H.
template <class Derived>
Matrix double_center(const Eigen::MatrixBase<Derived>& k) {
  if (k.rows() != k.cols()) throw ShapeError("double_center: matrix not square");
  const Index n = k.rows();
  Vector row_means = k.rowwise().mean();
  Vector col_means = k.transpose().rowwise().mean();
  const double grand = row_means.mean();
  Matrix c = k;
  c.colwise() -= row_means;
  c.rowwise() -= col_means.transpose();
  c.array() += grand;
  return c;
}

// tr(A B) = sum_ij A_ij B_ji without forming the product.
template <class A, class B>
double trace_product(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw ShapeError("trace_product: operands must be square and same size");
  }
  return (a.cwiseProduct(b.transpose())).sum();
}

inline Matrix one_hot(const std::vector<int>& labels, Index num_classes) {
  Matrix y = Matrix::Zero(static_cast<Index>(labels.size()), num_classes);
  for (Index i = 0; i < y.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= num_classes) {
      throw ShapeError("one_hot: label " + std::to_string(c) + " out of range");
    }
    y(i, c) = 1.0;
  }
  return y;
}

}  // namespace dualhsic
