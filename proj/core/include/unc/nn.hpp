#pragma once

#include <memory>
#include <string>
#include <vector>

#include "unc/dataset.hpp"
#include "unc/rng.hpp"
#include "unc/tensor.hpp"

namespace unc {

enum class LayerKind { dense, conv2d, relu, tanh_act, dropout, flatten };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_dim = 0, out_dim = 0;            // dense
  std::size_t in_channels = 0, out_channels = 0;  // conv2d
  std::size_t kernel = 0;
  int stride = 1;
  int pad = 0;
  double dropout_rate = 0.0;

  static LayerSpec Dense(std::size_t in, std::size_t out);
  static LayerSpec Conv2d(std::size_t in_c, std::size_t out_c, std::size_t kernel,
                          int stride, int pad);
  static LayerSpec Relu();
  static LayerSpec Tanh();
  static LayerSpec Dropout(double rate);  // rate strictly inside (0,1)
  static LayerSpec Flatten();

  bool parametric() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
};

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

// One posterior sample: scaled keep-masks for dropout models, per-parameter
// standard-normal noise for mean-field models.
struct PosteriorDraw {
  std::vector<Tensor> noise;
};

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t class_count() const = 0;
  virtual Shape input_shape() const = 0;  // {C, H, W}
  virtual std::size_t embedding_width() const = 0;
  virtual bool is_stochastic() const = 0;
  virtual std::string kind_tag() const = 0;
  virtual std::vector<Tensor> parameters() const = 0;

  // Deterministic forward: dropout off, mean-field evaluated at the mean.
  virtual Tensor predict_logits(const Tensor& x) const = 0;
  // One posterior sample theta_t ~ q(theta|D); throws UnsupportedModelError
  // on deterministic models.
  virtual PosteriorDraw sample_draw(Rng& rng) const = 0;
  virtual Tensor logits_under_draw(const Tensor& x, const PosteriorDraw& draw) const = 0;

  // Embedding sub-network output (deterministic path); head() composes with
  // it to reproduce predict_logits bit-exactly.
  virtual Tensor embed(const Tensor& x) const = 0;
  virtual Tensor head(const Tensor& h) const = 0;
};

// Point-estimate feedforward classifier; with dropout layers present it is
// the dropout-stochastic variant (dropout active only when asked for).
class FeedForwardClassifier : public Classifier {
 public:
  FeedForwardClassifier(std::vector<LayerSpec> specs, Shape input_shape,
                        std::size_t class_count, std::size_t embedding_boundary,
                        Rng& rng);

  std::size_t class_count() const override { return class_count_; }
  Shape input_shape() const override { return input_shape_; }
  std::size_t embedding_width() const override { return embedding_width_; }
  bool is_stochastic() const override { return dropout_count_ > 0; }
  std::string kind_tag() const override {
    return dropout_count_ > 0 ? "dropout" : "deterministic";
  }
  std::vector<Tensor> parameters() const override;

  Tensor predict_logits(const Tensor& x) const override;
  PosteriorDraw sample_draw(Rng& rng) const override;
  Tensor logits_under_draw(const Tensor& x, const PosteriorDraw& draw) const override;
  Tensor embed(const Tensor& x) const override;
  Tensor head(const Tensor& h) const override;

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t embedding_boundary() const { return embedding_boundary_; }
  // Weight/bias pairs in layer order, parametric layers only.
  std::vector<std::pair<Tensor, Tensor>>& layer_params() { return params_; }
  const std::vector<std::pair<Tensor, Tensor>>& layer_params() const { return params_; }

 private:
  Tensor forward_range(const Tensor& x, std::size_t begin, std::size_t end,
                       const std::vector<Tensor>* dropout_masks) const;

  std::vector<LayerSpec> specs_;
  Shape input_shape_;
  std::size_t class_count_;
  std::size_t embedding_boundary_;
  std::size_t embedding_width_ = 0;
  std::size_t dropout_count_ = 0;
  std::vector<std::pair<Tensor, Tensor>> params_;
};

// Mean-field variational classifier: independent Gaussian posterior per
// weight, sigma_w = softplus(rho), standard-normal prior.
class MeanFieldClassifier : public Classifier {
 public:
  struct VParam {
    Tensor mu_w, rho_w, mu_b, rho_b;
  };

  MeanFieldClassifier(std::vector<LayerSpec> specs, Shape input_shape,
                      std::size_t class_count, std::size_t embedding_boundary,
                      Rng& rng, double initial_sigma = 0.05);

  std::size_t class_count() const override { return class_count_; }
  Shape input_shape() const override { return input_shape_; }
  std::size_t embedding_width() const override { return embedding_width_; }
  bool is_stochastic() const override { return true; }
  std::string kind_tag() const override { return "meanfield"; }
  std::vector<Tensor> parameters() const override;

  Tensor predict_logits(const Tensor& x) const override;
  PosteriorDraw sample_draw(Rng& rng) const override;
  Tensor logits_under_draw(const Tensor& x, const PosteriorDraw& draw) const override;
  Tensor embed(const Tensor& x) const override;
  Tensor head(const Tensor& h) const override;

  // KL(q(theta|D) || N(0, I)) in closed form, differentiable in (mu, rho).
  Tensor kl_to_standard_normal() const;

  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t embedding_boundary() const { return embedding_boundary_; }
  std::vector<VParam>& variational_parameters() { return vparams_; }
  const std::vector<VParam>& variational_parameters() const { return vparams_; }

 private:
  Tensor forward_with(const Tensor& x, std::size_t begin, std::size_t end,
                      const std::vector<std::pair<Tensor, Tensor>>& weights) const;
  std::vector<std::pair<Tensor, Tensor>> weights_at_mean() const;
  std::vector<std::pair<Tensor, Tensor>> weights_from_draw(const PosteriorDraw& draw) const;

  std::vector<LayerSpec> specs_;
  Shape input_shape_;
  std::size_t class_count_;
  std::size_t embedding_boundary_;
  std::size_t embedding_width_ = 0;
  std::vector<VParam> vparams_;
};

// ---- free operations -------------------------------------------------------

// Logits with explicit stochasticity control; stochastic=true requires a
// stochastic model (dropout active / fresh posterior sample).
Tensor predict_logits(const Classifier& model, const Tensor& x, bool stochastic,
                      Rng* rng);

// T independent posterior-predictive probability vectors for one input
// [1,C,H,W]; deterministic order given the seed.
std::vector<std::vector<double>> sample_posterior_predictives(const Classifier& model,
                                                              const Tensor& x, int T,
                                                              Rng& rng);

struct OptimizerConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::size_t epochs = 5;
};

class SgdMomentum {
 public:
  SgdMomentum(std::vector<Tensor> params, double learning_rate, double momentum);
  void zero_grad();
  void step();
  // Gradient ascent variant used by the objective-maximizing trainers.
  void step_ascent();
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  void apply(double sign);
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double lr_;
  double momentum_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;
};
using TrainLog = std::vector<EpochLog>;

// Cross-entropy on [N,K] logits against integer labels (mean over rows).
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);

// Standard supervised training (SGD + momentum), deterministic given seed.
TrainLog train_classifier(FeedForwardClassifier& model, const Dataset& data,
                          const OptimizerConfig& cfg, Rng& rng);

// One Bayes-by-backprop step on a batch: sampled-weight NLL plus
// kl_weight * closed-form Gaussian KL, reparameterized gradients.
double bbb_train_step(MeanFieldClassifier& model, const Tensor& x,
                      const std::vector<int>& labels, double kl_weight,
                      SgdMomentum& opt, Rng& rng);

// Epoch loop over bbb_train_step with kl_weight = 1 / batches_per_epoch.
TrainLog train_meanfield_classifier(MeanFieldClassifier& model, const Dataset& data,
                                    const OptimizerConfig& cfg, Rng& rng);

// Desk-scale reference architectures.
std::vector<LayerSpec> conv_image_architecture(std::size_t in_channels,
                                               std::size_t height, std::size_t width,
                                               std::size_t class_count,
                                               double dropout_rate = 0.0);
std::size_t conv_image_embedding_boundary(double dropout_rate = 0.0);
std::vector<LayerSpec> dense_architecture(std::size_t in_dim, std::size_t hidden,
                                          std::size_t class_count);

}  // namespace unc
