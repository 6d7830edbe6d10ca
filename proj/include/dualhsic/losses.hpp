#pragma once

// Scalar training objectives and their gradients, packaged as
// (grad_logits, injected hidden gradients) bundles for network::backward:
// cross-entropy, the DER++-style buffer loss, the HSIC bottleneck penalty on
// rehearsal data (HBR), the symmetric HSIC alignment loss (HA), and the
// combined objective.

#include <optional>
#include <vector>

#include "dualhsic/hsic.hpp"
#include "dualhsic/network.hpp"

namespace dualhsic {

// Where the bottleneck penalty is applied (rehearsal ablation axis).
enum class HbrApplication { buffer_only, current_only, both };

struct DualHsicConfig {
  double lambda_x = 0.001;
  double lambda_y = 0.05;
  double lambda_ha = -0.75;
  std::vector<int> hbr_layers;  // 1-based hidden-layer indices; all layers by default
  HbrApplication ha_target = HbrApplication::buffer_only;
  KernelConfig kernel_x;
  KernelConfig kernel_y;
  KernelConfig kernel_z;

  bool hbr_enabled() const { return lambda_x != 0.0 || lambda_y != 0.0; }
  bool ha_enabled() const { return lambda_ha != 0.0; }
  bool enabled() const { return hbr_enabled() || ha_enabled(); }
  void validate(Index num_layers) const;
};

struct CrossEntropyResult {
  double value = 0.0;
  Matrix grad_logits;  // (softmax - onehot) / batch
};

CrossEntropyResult cross_entropy(const Eigen::Ref<const Matrix>& logits,
                                 const std::vector<int>& labels);

struct HbrResult {
  double value = 0.0;   // x_term + y_term
  double x_term = 0.0;  // +lambda_x * sum_j HSIC(X, Z_j)
  double y_term = 0.0;  // -lambda_y * sum_j HSIC(Y, Z_j)
  std::vector<HiddenGrad> grad_hidden;
};

// Bottleneck penalty over the configured layers of one forward trace.
// y_onehot carries one row per sample over the full class set.
HbrResult hbr_loss(const ForwardTrace& trace, const Eigen::Ref<const Matrix>& x,
                   const Eigen::Ref<const Matrix>& y_onehot, const DualHsicConfig& cfg);

struct HaResult {
  double value = 0.0;     // -(1/2)(HSIC(Zb, p(Zc)) + HSIC(p(Zb), Zc))
  double weighted = 0.0;  // lambda_ha * value, the objective contribution
  Matrix grad_z_buffer;   // gradients of the weighted term
  Matrix grad_z_current;
  HeadGrads grad_head;
};

// Symmetric alignment between buffered and current last-layer representations
// through a shared projection head; no stop-gradient on either branch.
HaResult ha_loss(const Eigen::Ref<const Matrix>& z_buffer,
                 const Eigen::Ref<const Matrix>& z_current, const ProjectionHead& head,
                 double lambda_ha, const KernelConfig& kernel = KernelConfig{});

struct DerppResult {
  double value = 0.0;
  Matrix grad_logits;
};

// alpha * MSE(logits, stored_logits) + beta * cross_entropy(logits, labels).
DerppResult der_pp_buffer_loss(const Eigen::Ref<const Matrix>& logits,
                               const Eigen::Ref<const Matrix>& stored_logits,
                               const std::vector<int>& labels, double alpha, double beta);

struct LossBreakdown {
  double total = 0.0;
  double base_cl = 0.0;
  double hbr_x = 0.0;
  double hbr_y = 0.0;
  double ha = 0.0;
};

struct LossParts {
  double base_cl = 0.0;
  Matrix grad_logits_current;
  Matrix grad_logits_buffer;  // size 0 when no buffer batch was drawn
  std::optional<HbrResult> hbr_buffer;
  std::optional<HbrResult> hbr_current;
  std::optional<HaResult> ha;
};

struct LossReport {
  LossBreakdown breakdown;
  Matrix grad_logits_current;
  Matrix grad_logits_buffer;
  std::vector<HiddenGrad> hidden_current;
  std::vector<HiddenGrad> hidden_buffer;
  HeadGrads head;
  bool has_head_grads = false;
};

// Merges the component losses and routes each gradient to its injection
// site. `last_layer` is L, where the alignment gradients attach.
LossReport total_loss(LossParts parts, int last_layer);

}  // namespace dualhsic
