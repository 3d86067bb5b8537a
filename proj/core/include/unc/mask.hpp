#pragma once

#include <optional>
#include <vector>

#include "unc/attacks.hpp"
#include "unc/nn.hpp"
#include "unc/rng.hpp"
#include "unc/tensor.hpp"
#include "unc/uncertainty.hpp"

namespace unc {

// Binary or relaxed mask with a one-to-one coordinate mapping to the input.
struct Mask {
  Tensor values;
  bool hard = false;
  double density() const;  // ones fraction (hard) / mean value (soft)
};

// Hourglass convolutional network producing one Bernoulli probability per
// input coordinate: two stride-2 convolutions down, two transposed
// convolutions back up to the input shape.
class MaskModel {
 public:
  MaskModel(Shape input_shape, Rng& rng, std::size_t width1 = 8, std::size_t width2 = 16);

  const Shape& input_shape() const { return input_shape_; }  // {C,H,W}
  std::size_t width1() const { return width1_; }
  std::size_t width2() const { return width2_; }

  Tensor raw(const Tensor& x) const;  // pre-activation logits, shape of x
  // (tanh(raw) + 1) / 2, kept strictly inside (0,1).
  Tensor probabilities(const Tensor& x) const;

  std::vector<Tensor> parameters() const { return tensors_; }
  std::vector<Tensor>& raw_tensors() { return tensors_; }
  const std::vector<Tensor>& raw_tensors() const { return tensors_; }

 private:
  Shape input_shape_;
  std::size_t width1_, width2_;
  // conv1 w/b, conv2 w/b, tconv1 w/b, tconv2 w/b
  std::vector<Tensor> tensors_;
};

// Binary-concrete sample: sigmoid((log p - log(1-p) + g1 - g0) / tau).
Mask sample_relaxed_mask(const Tensor& probs, double tau, Rng& rng);
// Same, with the Gumbel difference g1 - g0 supplied (frozen-noise paths).
Mask relaxed_mask_from_noise(const Tensor& probs, double tau, const Tensor& gumbel_delta);
// Draws the g1 - g0 tensor for a given shape.
Tensor sample_gumbel_delta(const Shape& shape, Rng& rng);

// Threshold at 0.5 (ties map to 1); idempotent on hard masks.
Mask harden_mask(const Mask& mask);

// Element-wise product omega .* x.
Tensor apply_mask(const Tensor& x, const Tensor& omega);

// I.i.d. Bernoulli(density) hard mask.
Mask random_mask(const Shape& shape, double density, Rng& rng);

struct MaskTrainConfig {
  double lambda = 1e-3;       // sparsity weight
  double tau_start = 1.0;     // relaxation temperature annealed linearly
  double tau_end = 0.1;
  double tau_eval = 0.1;      // evaluation-time sampling temperature
  double learning_rate = 0.02;  // beta
  int uncertainty_samples = 10; // T
  int inner_attack_steps = 10;
  std::size_t steps = 500;
  std::size_t batch_size = 16;

  void validate() const;
};

struct MaskObjectiveTerms {
  double ue = 0.0;
  double adv = 0.0;
  double sparsity = 0.0;  // mean ||omega||_1 per example (soft)
  double total = 0.0;
};

// Everything sampled in one objective evaluation, frozen so the objective is
// a deterministic, differentiable function of the mask parameters alone. The
// inner attack result is held constant.
struct MaskObjectiveContext {
  double tau = 1.0;
  Tensor gumbel_delta;
  Tensor hard_gate;
  Tensor x_adv_raw;
  std::vector<Tensor> surrogate_noise;          // deterministic classifier path
  std::vector<PosteriorDraw> posterior_draws;   // stochastic classifier path
};

// Samples the mask, runs the inner attack under the hardened gate, and draws
// the uncertainty-estimation noise. `surrogate` must be non-null exactly when
// the classifier is deterministic.
MaskObjectiveContext make_mask_objective_context(const Classifier& model,
                                                 const SurrogateModel* surrogate,
                                                 const MaskModel& mask_model, const Tensor& x,
                                                 const std::vector<int>& labels,
                                                 const ThreatConfig& threat,
                                                 const MaskTrainConfig& cfg, double tau,
                                                 Rng& rng);

// L = mean U_e(omega .* x) + L_adv(x + omega .* (x_adv - x)) - lambda * mean ||omega||_1,
// built on the tape so backward() yields d L / d nu.
Tensor localized_objective(const Classifier& model, const SurrogateModel* surrogate,
                           const MaskModel& mask_model, const Tensor& x,
                           const std::vector<int>& labels, const ThreatConfig& threat,
                           double lambda, const MaskObjectiveContext& ctx,
                           MaskObjectiveTerms* terms = nullptr);

// One ascent step on the objective w.r.t. the mask parameters (plain SGD,
// rate beta). The classifier and surrogate are left untouched.
MaskObjectiveTerms train_mask_step(const Classifier& model, const SurrogateModel* surrogate,
                                   MaskModel& mask_model, const Tensor& x,
                                   const std::vector<int>& labels, const ThreatConfig& threat,
                                   const MaskTrainConfig& cfg, double tau, Rng& rng);

struct MaskTrainLogEntry {
  std::size_t step = 0;
  MaskObjectiveTerms terms;
  double tau = 0.0;
};

// Full training loop: linear temperature anneal, one mask sample per step,
// and (deterministic classifiers only) an interleaved surrogate update per
// outer step when co_train_surrogate is set.
std::vector<MaskTrainLogEntry> train_mask_model(const Classifier& model,
                                                SurrogateModel* surrogate,
                                                MaskModel& mask_model, const Dataset& data,
                                                const ThreatConfig& threat,
                                                const MaskTrainConfig& cfg, Rng& rng,
                                                bool co_train_surrogate = true,
                                                int surrogate_m = 5,
                                                double surrogate_alpha = 0.05);

// Hard mask for one input at evaluation time (sampled at tau_eval, hardened).
Mask eval_mask(const MaskModel& mask_model, const Tensor& x, double tau_eval, Rng& rng);

}  // namespace unc
