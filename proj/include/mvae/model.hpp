#ifndef MVAE_MODEL_HPP
#define MVAE_MODEL_HPP

#include "mvae/batch.hpp"
#include "mvae/gaussian.hpp"
#include "mvae/numerics/tape.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mvae {

enum class Likelihood { bernoulli, categorical, gaussian };
enum class Variant { mvae, mvae_q };

std::string to_string(Likelihood l);
std::string to_string(Variant v);
Likelihood parse_likelihood(const std::string& s);
Variant parse_variant(const std::string& s);

struct ModalitySpec {
  std::string name;
  Likelihood likelihood = Likelihood::bernoulli;
  // Feature count, or the class count for categorical modalities.
  Index data_dim = 1;
  std::vector<Index> hidden_dims;
  double lambda_weight = 1.0;
  // Encoder's first layer becomes a bias-free embedding of the one-hot class.
  bool embed_first_layer = false;
};

struct ModelConfig {
  Index latent_dim = 1;
  std::vector<ModalitySpec> modalities;
  Variant variant = Variant::mvae;

  Index modality_count() const noexcept { return static_cast<Index>(modalities.size()); }
  void validate() const;
};

// 784-d Bernoulli image and embedded 10-class label, MLPs of [512, 512],
// 64 latent dimensions, lambda = (1, 50).
ModelConfig reference_mnist_config();

struct Parameter {
  std::string name;
  Tensor value;
};

struct DenseLayer {
  std::size_t weight;
  std::optional<std::size_t> bias;
};

// Per-modality MLP encoders (emitting 2*D values: mean then log-variance) and
// decoders. Weights are initialized uniformly in +-1/sqrt(fan_in).
class MvaeModel {
 public:
  MvaeModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  Index latent_dim() const noexcept { return config_.latent_dim; }
  Index modality_count() const noexcept { return config_.modality_count(); }
  const ModalitySpec& spec(Index i) const { return config_.modalities.at(static_cast<std::size_t>(i)); }
  Variant variant() const noexcept { return config_.variant; }
  std::vector<double> default_lambdas() const;

  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  const Tensor& parameter(std::size_t i) const { return params_.at(i).value; }
  void set_parameter(std::size_t i, Tensor value);

  std::span<const DenseLayer> encoder_layers(Index i) const;
  std::span<const DenseLayer> decoder_layers(Index i) const;

  // Copy whose parameters are watched leaves of `tape`.
  MvaeModel bind(GradTape& tape) const;

 private:
  void add_mlp(std::vector<DenseLayer>& layers, const std::string& prefix, Index in,
               const std::vector<Index>& hidden, Index out, bool first_bias, std::uint64_t seed);

  ModelConfig config_;
  std::vector<Parameter> params_;
  std::vector<std::vector<DenseLayer>> encoders_;
  std::vector<std::vector<DenseLayer>> decoders_;
};

// Class indices ([B x 1]) to one-hot rows; throws DomainError for bad indices.
Tensor one_hot(const Tensor& indices, Index classes);

// Inference network i. Categorical input may be class indices or one-hot.
// Under the mvae_q variant the variance head goes through
// constrain_variance_for_quotient.
DiagGaussian encode_modality(const MvaeModel& model, Index i, const Tensor& x);

// Likelihood parameters: Bernoulli logits, class logits, or Gaussian means.
Tensor decode_modality(const MvaeModel& model, Index i, const Tensor& z);

// log p(x | params) per example ([B]). Rows of x broadcast against params.
Tensor log_likelihood(const ModalitySpec& spec, const Tensor& params, const Tensor& x);

Index count_inference_parameters(const MvaeModel& model);
Index count_encoder_parameters(const MvaeModel& model, Index modality);

}  // namespace mvae

#endif  // MVAE_MODEL_HPP
