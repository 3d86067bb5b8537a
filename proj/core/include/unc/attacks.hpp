#pragma once

#include <optional>
#include <vector>

#include "unc/nn.hpp"
#include "unc/rng.hpp"
#include "unc/tensor.hpp"

namespace unc {

enum class ThreatKind { additive, recolor };
enum class LossKind { f6, cross_entropy };

ThreatKind threat_kind_from_string(const std::string& name);
std::string to_string(ThreatKind kind);
LossKind loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

struct ThreatConfig {
  ThreatKind kind = ThreatKind::additive;
  double epsilon = 8.0 / 255.0;  // L_inf radius, fraction of dynamic range
  // Per-channel recolor displacement bounds.
  double bound_r = 0.03, bound_g = 0.03, bound_b = 0.03;
  int steps = 100;
  double step_size = 0.0;  // 0 selects 2.5 * bound / steps
  double kappa = 10.0;
  LossKind loss = LossKind::f6;
  int posterior_samples = 10;  // T for stochastic targets
  std::size_t grid_resolution = 8;
  bool random_start = true;

  void validate() const;
};

struct AttackResult {
  Tensor x_adv;  // [N,C,H,W], inside the threat set and [0,1]
  std::vector<bool> success;
  std::optional<Tensor> mask;       // hard gate, when one was supplied
  std::vector<double> loss_trace;   // per-step mean ascent objective
  std::vector<double> final_margin; // per-example best (lowest) f6 margin
};

// max(Z_y - max_{i != y} Z_i, -kappa) per row; the attacker descends this.
Tensor cw_f6_rows(const Tensor& logits, const std::vector<int>& labels, double kappa);
double cw_f6_loss(const Tensor& logits, int label, double kappa);

// Scalar objective the attacker ascends: mean negated f6 margin or mean
// cross-entropy; stochastic models average the loss over T posterior draws.
Tensor adversarial_loss(const Classifier& model, const Tensor& x,
                        const std::vector<int>& labels, const ThreatConfig& cfg, Rng& rng);

// Element-wise clamp to [x - eps, x + eps] intersected with [lo, hi].
Tensor project_linf(const Tensor& candidate, const Tensor& x, double epsilon,
                    double lo = 0.0, double hi = 1.0);

// Piecewise gate: perturbed where omega_i = 1, the original value otherwise.
Tensor masked_perturb(const Tensor& x, const Tensor& omega, const Tensor& perturbed);

// Projected gradient ascent in input space; omega (optional) restricts the
// perturbation support. Returns the best iterate by f6 margin.
AttackResult pgd_attack(const Classifier& model, const Tensor& x,
                        const std::vector<int>& labels, const Tensor* omega,
                        const ThreatConfig& cfg, Rng& rng);

// Uniform color-space transform: per-vertex displacements on a GxGxG RGB
// lattice, applied to every pixel by trilinear interpolation.
struct ReColorParams {
  Tensor grid;  // [G,G,G,3]
};

ReColorParams zero_recolor_params(std::size_t grid_resolution);

// c + trilinear(grid at c), then clipped to [0,1]. Pure in (x, params).
Tensor recolor_apply(const Tensor& x, const ReColorParams& params);

// Projected gradient ascent in grid space (per-example grids), clamping
// displacements to the per-channel bounds each step.
AttackResult recolor_attack(const Classifier& model, const Tensor& x,
                            const std::vector<int>& labels, const Tensor* omega,
                            const ThreatConfig& cfg, Rng& rng);

// Dispatch on cfg.kind.
AttackResult run_attack(const Classifier& model, const Tensor& x,
                        const std::vector<int>& labels, const Tensor* omega,
                        const ThreatConfig& cfg, Rng& rng);

}  // namespace unc
