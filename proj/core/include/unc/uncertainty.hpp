#pragma once

#include <span>
#include <vector>

#include "unc/nn.hpp"
#include "unc/rng.hpp"
#include "unc/tensor.hpp"

namespace unc {

// Predictive entropy, expected entropy, and their difference (mutual
// information between parameters and prediction), all in nats.
struct UncertaintyEstimate {
  double u_t = 0.0;
  double u_p = 0.0;
  double u_e = 0.0;
  int sample_count = 0;
};

// -sum p log p with 0 log 0 = 0; validates that p is a distribution.
double entropy(std::span<const double> p);

// U_t = H[mean of samples], U_p = mean of per-sample entropies, U_e = U_t - U_p.
UncertaintyEstimate mutual_information(const std::vector<std::vector<double>>& samples);

// Mutual information from T posterior-predictive samples of a stochastic model.
UncertaintyEstimate stochastic_uncertainty(const Classifier& model, const Tensor& x, int T,
                                           Rng& rng);

// Amortized-uncertainty surrogate: two hidden layers map an embedding h to a
// per-dimension standard deviation sigma (softplus, floored at 1e-6), plus its
// own multinomial head over sampled representations z ~ N(h, diag(sigma^2)).
class SurrogateModel {
 public:
  SurrogateModel(std::size_t embedding_width, std::size_t class_count, Rng& rng,
                 double dropout_rate = 0.1);

  std::size_t embedding_width() const { return embedding_width_; }
  std::size_t class_count() const { return class_count_; }
  double dropout_rate() const { return dropout_rate_; }

  // sigma = C_phi(h), strictly positive, shape equal to h.
  // Training mode applies dropout to the hidden activations.
  Tensor sigma(const Tensor& h, bool training = false, Rng* rng = nullptr) const;
  // W^T z + b over sampled representations.
  Tensor head_logits(const Tensor& z) const;

  std::vector<Tensor> parameters() const;
  std::vector<Tensor>& raw_tensors() { return tensors_; }
  const std::vector<Tensor>& raw_tensors() const { return tensors_; }

 private:
  std::size_t embedding_width_;
  std::size_t class_count_;
  double dropout_rate_;
  // w1,b1,w2,b2,w3,b3 (sigma net), head_W, head_b.
  std::vector<Tensor> tensors_;
};

// T probability vectors p(y|z_t; phi) with z_t = h + sigma .* eta_t for one
// input [1,C,H,W]; classifier weights are never touched.
std::vector<std::vector<double>> surrogate_sample_distributions(
    const Classifier& classifier, const SurrogateModel& surrogate, const Tensor& x, int T,
    Rng& rng);

// mutual_information over surrogate_sample_distributions.
UncertaintyEstimate amortized_uncertainty(const Classifier& classifier,
                                          const SurrogateModel& surrogate, const Tensor& x,
                                          int T, Rng& rng);

// One ascent step on the mean log-likelihood of M sampled representations per
// example (reparameterized through sigma); plain SGD with rate alpha. The
// classifier is frozen; returns the negated objective as loss.
double train_surrogate_step(const Classifier& classifier, SurrogateModel& surrogate,
                            const Tensor& x, const std::vector<int>& labels, int M,
                            double alpha, Rng& rng);

struct SurrogateTrainConfig {
  int representation_samples = 5;  // M
  double learning_rate = 0.05;     // alpha
  std::size_t batch_size = 64;
  std::size_t epochs = 3;
};

TrainLog train_surrogate(const Classifier& classifier, SurrogateModel& surrogate,
                         const Dataset& data, const SurrogateTrainConfig& cfg, Rng& rng);

// ---- differentiable row-wise estimators (autodiff paths) ----

// -sum p log p per row of an [N,K] probability tensor (p strictly positive).
Tensor entropy_rows(const Tensor& probs);

// Row-wise U_e from T probability tensors of shape [N,K].
Tensor mutual_information_rows(const std::vector<Tensor>& sample_probs);

// Differentiable U_e rows via the surrogate: noise holds T standard-normal
// tensors shaped [N, embedding_width].
Tensor amortized_ue_rows(const Classifier& classifier, const SurrogateModel& surrogate,
                         const Tensor& x, const std::vector<Tensor>& noise);

// Differentiable U_e rows for a stochastic classifier under frozen draws.
Tensor stochastic_ue_rows(const Classifier& model, const Tensor& x,
                          const std::vector<PosteriorDraw>& draws);

}  // namespace unc
