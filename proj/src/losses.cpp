#include "dualhsic/losses.hpp"

#include <cmath>
#include <string>

namespace dualhsic {

void DualHsicConfig::validate(Index num_layers) const {
  if (hbr_enabled()) {
    if (hbr_layers.empty()) {
      throw ConfigError("DualHsicConfig: hbr_layers must be nonempty when HBR is enabled");
    }
    for (int j : hbr_layers) {
      if (j < 1 || j > num_layers) {
        throw ConfigError("DualHsicConfig: hbr layer " + std::to_string(j) +
                          " outside 1.." + std::to_string(num_layers));
      }
    }
  }
  if (enabled() && kernel_z.kind != KernelKind::gaussian) {
    throw ConfigError("DualHsicConfig: latent kernel must be gaussian (analytic gradient)");
  }
  if (kernel_x.kind == KernelKind::gaussian && !(kernel_x.sigma > 0.0)) {
    throw ConfigError("DualHsicConfig: kernel_x sigma must be positive");
  }
  if (kernel_y.kind == KernelKind::gaussian && !(kernel_y.sigma > 0.0)) {
    throw ConfigError("DualHsicConfig: kernel_y sigma must be positive");
  }
  if (kernel_z.kind == KernelKind::gaussian && !(kernel_z.sigma > 0.0)) {
    throw ConfigError("DualHsicConfig: kernel_z sigma must be positive");
  }
}

CrossEntropyResult cross_entropy(const Eigen::Ref<const Matrix>& logits,
                                 const std::vector<int>& labels) {
  const Index n = logits.rows();
  const Index c = logits.cols();
  if (static_cast<Index>(labels.size()) != n) {
    throw ShapeError("cross_entropy: label count != batch size");
  }
  CrossEntropyResult r;
  r.grad_logits = Matrix::Zero(n, c);
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= c) {
      throw ShapeError("cross_entropy: label " + std::to_string(y) + " out of range");
    }
    const double mx = logits.row(i).maxCoeff();
    Eigen::RowVectorXd shifted = (logits.row(i).array() - mx).matrix();
    Eigen::RowVectorXd ex = shifted.array().exp().matrix();
    const double denom = ex.sum();
    loss += std::log(denom) - shifted(y);
    r.grad_logits.row(i) = ex / denom;
    r.grad_logits(i, y) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  r.value = loss * inv_n;
  r.grad_logits *= inv_n;
  return r;
}

HbrResult hbr_loss(const ForwardTrace& trace, const Eigen::Ref<const Matrix>& x,
                   const Eigen::Ref<const Matrix>& y_onehot, const DualHsicConfig& cfg) {
  HbrResult r;
  if (!cfg.hbr_enabled()) return r;
  cfg.validate(static_cast<Index>(trace.z.size()));
  if (x.rows() < 2) throw DegenerateBatchError("hbr_loss: needs at least 2 samples");

  for (int j : cfg.hbr_layers) {
    const Matrix& z = trace.z[static_cast<std::size_t>(j - 1)];
    Matrix grad = Matrix::Zero(z.rows(), z.cols());
    if (cfg.lambda_x != 0.0) {
      r.x_term += cfg.lambda_x * empirical_hsic(x, z, cfg.kernel_x, cfg.kernel_z).value;
      grad += cfg.lambda_x * hsic_gradient_wrt_first(z, x, cfg.kernel_z, cfg.kernel_x);
    }
    if (cfg.lambda_y != 0.0) {
      r.y_term -= cfg.lambda_y * empirical_hsic(y_onehot, z, cfg.kernel_y, cfg.kernel_z).value;
      grad -= cfg.lambda_y * hsic_gradient_wrt_first(z, y_onehot, cfg.kernel_z, cfg.kernel_y);
    }
    r.grad_hidden.push_back({j, std::move(grad)});
  }
  r.value = r.x_term + r.y_term;
  return r;
}

HaResult ha_loss(const Eigen::Ref<const Matrix>& z_buffer,
                 const Eigen::Ref<const Matrix>& z_current, const ProjectionHead& head,
                 double lambda_ha, const KernelConfig& kernel) {
  if (z_buffer.rows() != z_current.rows()) {
    throw ShapeError("ha_loss: buffered and current batches must have equal size");
  }
  if (z_buffer.cols() != z_current.cols() || z_buffer.cols() != head.dim()) {
    throw ShapeError("ha_loss: representation width must equal the head dimension");
  }
  if (z_buffer.rows() < 2) throw DegenerateBatchError("ha_loss: needs at least 2 samples");
  if (kernel.kind != KernelKind::gaussian) {
    throw ConfigError("ha_loss: alignment kernel must be gaussian (analytic gradient)");
  }

  Matrix p_current = project(head, z_current);
  Matrix p_buffer = project(head, z_buffer);

  const double h1 = empirical_hsic(z_buffer, p_current, kernel, kernel).value;
  const double h2 = empirical_hsic(p_buffer, z_current, kernel, kernel).value;

  HaResult r;
  r.value = -0.5 * (h1 + h2);
  r.weighted = lambda_ha * r.value;
  r.grad_head = zero_head_grads(head);

  const double s = -0.5 * lambda_ha;  // d(weighted)/d(h1) = d(weighted)/d(h2)
  Matrix g_p_current = s * hsic_gradient_wrt_first(p_current, z_buffer, kernel, kernel);
  Matrix g_p_buffer = s * hsic_gradient_wrt_first(p_buffer, z_current, kernel, kernel);

  r.grad_z_current = project_backward(head, z_current, g_p_current, r.grad_head);
  r.grad_z_current += s * hsic_gradient_wrt_first(z_current, p_buffer, kernel, kernel);
  r.grad_z_buffer = project_backward(head, z_buffer, g_p_buffer, r.grad_head);
  r.grad_z_buffer += s * hsic_gradient_wrt_first(z_buffer, p_current, kernel, kernel);
  return r;
}

DerppResult der_pp_buffer_loss(const Eigen::Ref<const Matrix>& logits,
                               const Eigen::Ref<const Matrix>& stored_logits,
                               const std::vector<int>& labels, double alpha, double beta) {
  if (logits.rows() != stored_logits.rows() || logits.cols() != stored_logits.cols()) {
    throw ShapeError("der_pp_buffer_loss: logits and stored logits differ in shape");
  }
  DerppResult r;
  Matrix diff = logits - stored_logits;
  const double count = static_cast<double>(logits.rows() * logits.cols());
  const double mse = diff.squaredNorm() / count;
  CrossEntropyResult ce = cross_entropy(logits, labels);
  r.value = alpha * mse + beta * ce.value;
  r.grad_logits = (2.0 * alpha / count) * diff + beta * ce.grad_logits;
  return r;
}

LossReport total_loss(LossParts parts, int last_layer) {
  LossReport report;
  report.breakdown.base_cl = parts.base_cl;
  report.grad_logits_current = std::move(parts.grad_logits_current);
  report.grad_logits_buffer = std::move(parts.grad_logits_buffer);

  if (parts.hbr_buffer) {
    report.breakdown.hbr_x += parts.hbr_buffer->x_term;
    report.breakdown.hbr_y += parts.hbr_buffer->y_term;
    report.hidden_buffer = std::move(parts.hbr_buffer->grad_hidden);
  }
  if (parts.hbr_current) {
    report.breakdown.hbr_x += parts.hbr_current->x_term;
    report.breakdown.hbr_y += parts.hbr_current->y_term;
    report.hidden_current = std::move(parts.hbr_current->grad_hidden);
  }
  if (parts.ha) {
    report.breakdown.ha = parts.ha->weighted;
    report.hidden_buffer.push_back({last_layer, std::move(parts.ha->grad_z_buffer)});
    report.hidden_current.push_back({last_layer, std::move(parts.ha->grad_z_current)});
    report.head = std::move(parts.ha->grad_head);
    report.has_head_grads = true;
  }
  report.breakdown.total = report.breakdown.base_cl + report.breakdown.hbr_x +
                           report.breakdown.hbr_y + report.breakdown.ha;
  return report;
}

}  // namespace dualhsic
