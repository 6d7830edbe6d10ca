#include "dualhsic/hsic.hpp"

#include <algorithm>
#include <cmath>

namespace dualhsic {

Matrix kernel_matrix(const Eigen::Ref<const Matrix>& x, const KernelConfig& cfg) {
  if (x.rows() == 0) throw ShapeError("kernel_matrix: empty batch");
  if (cfg.kind == KernelKind::linear) {
    return x * x.transpose();
  }
  if (!(cfg.sigma > 0.0)) {
    throw ConfigError("kernel_matrix: gaussian bandwidth must be positive");
  }
  Matrix k = pairwise_sq_dists(x);
  k = (-k / (2.0 * cfg.sigma * cfg.sigma)).array().exp().matrix();
  k.diagonal().setOnes();  // exact 1 on the diagonal
  return k;
}

HsicValue empirical_hsic(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y,
                         const KernelConfig& cfg_x, const KernelConfig& cfg_y) {
  if (x.rows() != y.rows()) {
    throw ShapeError("empirical_hsic: batches have different row counts");
  }
  const Index n = x.rows();
  if (n < 2) throw DegenerateBatchError("empirical_hsic: needs at least 2 samples");
  Matrix kx = double_center(kernel_matrix(x, cfg_x));
  Matrix ky = double_center(kernel_matrix(y, cfg_y));
  const double scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 1));
  return HsicValue{scale * trace_product(kx, ky), n};
}

Matrix hsic_gradient_wrt_first(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y,
                               const KernelConfig& cfg_x, const KernelConfig& cfg_y) {
  if (cfg_x.kind != KernelKind::gaussian) {
    throw ConfigError("hsic_gradient_wrt_first: differentiated kernel must be gaussian");
  }
  if (x.rows() != y.rows()) {
    throw ShapeError("hsic_gradient_wrt_first: batches have different row counts");
  }
  const Index n = x.rows();
  if (n < 2) throw DegenerateBatchError("hsic_gradient_wrt_first: needs at least 2 samples");

  Matrix kx = kernel_matrix(x, cfg_x);
  Matrix m = double_center(kernel_matrix(y, cfg_y));
  Matrix w = m.cwiseProduct(kx);

  // G_i = c * sum_j W_ij (x_j - x_i); the differences are formed explicitly
  // so identical samples yield an exactly zero gradient.
  Matrix g(n, x.cols());
  for (Index i = 0; i < n; ++i) {
    g.row(i) = w.row(i) * (x.rowwise() - x.row(i));
  }
  const double nm1 = static_cast<double>(n - 1);
  g *= 2.0 / (nm1 * nm1 * cfg_x.sigma * cfg_x.sigma);
  return g;
}

std::vector<Index> random_permutation(Index n, RngState& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

double permutation_null_quantile(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Matrix>& y,
                                 const KernelConfig& cfg_x, const KernelConfig& cfg_y,
                                 int permutations, double q, RngState rng) {
  if (permutations < 100) {
    throw ConfigError("permutation_null_quantile: needs at least 100 permutations");
  }
  if (!(q > 0.0 && q < 1.0)) {
    throw ConfigError("permutation_null_quantile: quantile must be in (0, 1)");
  }
  const Index n = x.rows();
  std::vector<double> null_values(static_cast<std::size_t>(permutations));
  for (int p = 0; p < permutations; ++p) {
    RngState stream = rng.split(static_cast<std::uint64_t>(p));
    std::vector<Index> perm = random_permutation(n, stream);
    Matrix shuffled(n, y.cols());
    for (Index i = 0; i < n; ++i) shuffled.row(i) = y.row(perm[static_cast<std::size_t>(i)]);
    null_values[static_cast<std::size_t>(p)] = empirical_hsic(x, shuffled, cfg_x, cfg_y).value;
  }
  std::sort(null_values.begin(), null_values.end());
  // conservative order statistic: the ceil(q*P)-th smallest
  auto rank = static_cast<std::size_t>(std::ceil(q * permutations));
  rank = std::min(std::max<std::size_t>(rank, 1), null_values.size());
  return null_values[rank - 1];
}

}  // namespace dualhsic
