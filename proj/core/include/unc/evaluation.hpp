#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unc/attacks.hpp"
#include "unc/dataset.hpp"
#include "unc/mask.hpp"
#include "unc/nn.hpp"
#include "unc/uncertainty.hpp"

namespace unc {

struct EvalRow {
  std::size_t index = 0;
  int true_label = 0;
  int clean_pred = 0;
  int adv_pred = 0;
  bool success = false;
  double l0_fraction = 0.0;
  double linf = 0.0;
  double mask_density = 1.0;  // 1 when the whole input was perturbable
  double loss_final = 0.0;    // best f6 margin reached
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double clean_accuracy = 0.0;
  double post_attack_accuracy = 0.0;
  double asr_drop = 0.0;  // clean - post, reported signed
  double mean_l0_fraction = 0.0;
  double mean_mask_density = 0.0;
  std::string config_fingerprint;
  std::uint64_t seed = 0;

  void recompute_aggregates();
};

struct EvalOptions {
  std::optional<int> stochastic_samples;  // T for stochastic predictions
  std::size_t batch_size = 128;
  double tau_eval = 0.1;  // mask sampling temperature at evaluation time
  std::string config_fingerprint;
};

// Fraction of argmax-correct predictions; stochastic models use the
// T-sample mean predictive.
double accuracy(const Classifier& model, const Dataset& data,
                std::optional<int> stochastic_samples, std::uint64_t seed);

// Changed coordinates (|x - x'| > 1e-9) over C*W*H.
double l0_sparsity_fraction(const Tensor& x, const Tensor& x_adv);

// KL(p || q) with additive smoothing then renormalization; >= 0.
double categorical_kl(std::span<const double> p, std::span<const double> q,
                      double eps = 1e-12);

// Attacks every example (optionally gated by masks sampled from mask_model)
// and aggregates per-example rows.
EvalReport run_attack_eval(const Classifier& model, const Dataset& data,
                           const ThreatConfig& threat, const MaskModel* mask_model,
                           std::uint64_t seed, const EvalOptions& opts = {});

// Adversarial examples crafted against `source`, measured on `target`;
// returns the target's post-attack accuracy.
double transferability_eval(const Classifier& source, const Classifier& target,
                            const Dataset& data, const ThreatConfig& threat,
                            std::uint64_t seed, const EvalOptions& opts = {});

struct AblationReport {
  EvalReport learned;
  EvalReport random;
  double learned_density = 0.0;
  double random_density = 0.0;
};

// Learned masks vs density-matched random masks on the same split and seed.
AblationReport ablation_random_vs_uncertainty(const Classifier& model, const Dataset& data,
                                              const MaskModel& mask_model,
                                              const ThreatConfig& threat, std::uint64_t seed,
                                              const EvalOptions& opts = {});

// Mean KL(P_d || P_m) and mean KL(P_s || P_m) over the dataset, where P_d is
// the deterministic softmax, P_s the mean surrogate sample distribution, and
// P_m the mean mean-field posterior predictive.
std::pair<double, double> surrogate_fidelity(const Classifier& deterministic,
                                             const SurrogateModel& surrogate,
                                             const Classifier& meanfield, const Dataset& data,
                                             int T, std::uint64_t seed);

// CSV with a fingerprint comment line, a header, one row per example, and a
// SUMMARY row; byte-stable for a fixed seed.
void emit_report(const EvalReport& report, const std::string& path);

// Parses an emitted report and verifies the summary against the rows.
EvalReport parse_report(const std::string& path);

}  // namespace unc
