#pragma once

// Shared test utilities: seeded random batches and central finite
// differences. The finite-difference oracle is intentionally independent of
// the library's analytic gradient paths.

#include <functional>

#include "dualhsic/numerics.hpp"
#include "dualhsic/rng.hpp"

namespace dualhsic::testing {

inline Matrix random_uniform(RngState& rng, Index rows, Index cols, double lo = 0.0,
                             double hi = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = lo + (hi - lo) * rng.next_double();
  }
  return m;
}

inline Matrix random_gaussian(RngState& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.next_gaussian();
  }
  return m;
}

inline double rel_error(const Matrix& a, const Matrix& b) {
  const double denom = a.norm() + b.norm();
  if (denom < 1e-12) return (a - b).norm();
  return (a - b).norm() / denom;
}

// Central finite differences of a scalar functional with respect to every
// entry of `x`, leaving `x` unchanged.
inline Matrix finite_diff(const std::function<double(const Matrix&)>& f, Matrix x,
                          double step = 1e-5) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double saved = x(i, j);
      x(i, j) = saved + step;
      const double up = f(x);
      x(i, j) = saved - step;
      const double down = f(x);
      x(i, j) = saved;
      g(i, j) = (up - down) / (2.0 * step);
    }
  }
  return g;
}

// Central difference for one scalar cell reached through a reference.
inline double finite_diff_cell(const std::function<double()>& eval, double& cell,
                               double step = 1e-5) {
  const double saved = cell;
  cell = saved + step;
  const double up = eval();
  cell = saved - step;
  const double down = eval();
  cell = saved;
  return (up - down) / (2.0 * step);
}

}  // namespace dualhsic::testing
