#pragma once

// Empirical Hilbert-Schmidt independence criterion: Gaussian/linear kernel
// matrices, the biased batch estimator (n-1)^-2 tr(Kx H Ky H), its analytic
// gradient with respect to one argument's samples, and a permutation-null
// quantile harness for dependence testing.

#include <vector>

#include "dualhsic/numerics.hpp"
#include "dualhsic/rng.hpp"

namespace dualhsic {

enum class KernelKind { gaussian, linear };

struct KernelConfig {
  double sigma = 5.0;  // Gaussian bandwidth; K_ij = exp(-||xi-xj||^2 / (2 sigma^2))
  KernelKind kind = KernelKind::gaussian;
};

struct HsicValue {
  double value = 0.0;
  Index n = 0;  // batch size the estimate was computed on
};

Matrix kernel_matrix(const Eigen::Ref<const Matrix>& x, const KernelConfig& cfg);

HsicValue empirical_hsic(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y,
                         const KernelConfig& cfg_x, const KernelConfig& cfg_y);

// d HSIC / d x_i for a Gaussian kernel on x:
//   G_i = 2 (n-1)^-2 sigma^-2 sum_j M_ij K_ij (x_j - x_i),  M = H Ky H.
// Matches central finite differences of empirical_hsic.
Matrix hsic_gradient_wrt_first(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y,
                               const KernelConfig& cfg_x, const KernelConfig& cfg_y);

// q-quantile of the estimator under row-permutations of y. Each permutation
// uses its own child stream of `rng`, so the result does not depend on
// evaluation order.
double permutation_null_quantile(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y,
                                 const KernelConfig& cfg_x, const KernelConfig& cfg_y,
                                 int permutations, double q, RngState rng);

// Fisher-Yates permutation of {0..n-1}, deterministic under `rng`.
std::vector<Index> random_permutation(Index n, RngState& rng);

}  // namespace dualhsic
