#include "mvae/model.hpp"

#include "mvae/error.hpp"
#include "mvae/numerics/rng.hpp"

#include <cmath>
#include <numbers>

namespace mvae {

std::string to_string(Likelihood l) {
  switch (l) {
    case Likelihood::bernoulli: return "bernoulli";
    case Likelihood::categorical: return "categorical";
    case Likelihood::gaussian: return "gaussian";
  }
  return "?";
}

std::string to_string(Variant v) { return v == Variant::mvae ? "mvae" : "mvae_q"; }

Likelihood parse_likelihood(const std::string& s) {
  if (s == "bernoulli") return Likelihood::bernoulli;
  if (s == "categorical") return Likelihood::categorical;
  if (s == "gaussian") return Likelihood::gaussian;
  throw ConfigError("unknown likelihood '" + s + "'");
}

Variant parse_variant(const std::string& s) {
  if (s == "mvae") return Variant::mvae;
  if (s == "mvae_q") return Variant::mvae_q;
  throw ConfigError("unknown variant '" + s + "'");
}

void ModelConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (modalities.empty() || modalities.size() > 64) throw ConfigError("model needs 1..64 modalities");
  if (variant == Variant::mvae_q && modalities.size() < 2) throw ConfigError("mvae_q needs at least 2 modalities");
  for (const ModalitySpec& m : modalities) {
    if (m.data_dim < 1) throw ConfigError("modality '" + m.name + "': data_dim must be >= 1");
    if (!(m.lambda_weight > 0.0)) throw ConfigError("modality '" + m.name + "': lambda must be > 0");
    if (m.likelihood == Likelihood::categorical && m.data_dim < 2) {
      throw ConfigError("modality '" + m.name + "': categorical needs at least 2 classes");
    }
    if (m.embed_first_layer && m.likelihood != Likelihood::categorical) {
      throw ConfigError("modality '" + m.name + "': embedding requires a categorical modality");
    }
    if (m.embed_first_layer && m.hidden_dims.empty()) {
      throw ConfigError("modality '" + m.name + "': embedding requires at least one hidden layer");
    }
    for (Index h : m.hidden_dims)
      if (h < 1) throw ConfigError("modality '" + m.name + "': hidden widths must be >= 1");
  }
}

ModelConfig reference_mnist_config() {
  ModelConfig c;
  c.latent_dim = 64;
  c.modalities.push_back({"image", Likelihood::bernoulli, 784, {512, 512}, 1.0, false});
  c.modalities.push_back({"label", Likelihood::categorical, 10, {512, 512}, 50.0, true});
  return c;
}

MvaeModel::MvaeModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const Index d = config_.latent_dim;
  for (Index i = 0; i < modality_count(); ++i) {
    const ModalitySpec& m = spec(i);
    std::vector<DenseLayer> enc, dec;
    add_mlp(enc, "enc." + m.name, m.data_dim, m.hidden_dims, 2 * d, !m.embed_first_layer, seed);
    std::vector<Index> reversed(m.hidden_dims.rbegin(), m.hidden_dims.rend());
    add_mlp(dec, "dec." + m.name, d, reversed, m.data_dim, true, seed);
    encoders_.push_back(std::move(enc));
    decoders_.push_back(std::move(dec));
  }
}

void MvaeModel::add_mlp(std::vector<DenseLayer>& layers, const std::string& prefix, Index in,
                        const std::vector<Index>& hidden, Index out, bool first_bias, std::uint64_t seed) {
  std::vector<Index> widths{in};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Index fan_in = widths[l], fan_out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    const std::string name = prefix + "." + std::to_string(l);
    RngStream stream = RngStream(seed, 0x1417).split(params_.size());

    DenseLayer layer{params_.size(), std::nullopt};
    Eigen::VectorXd w(fan_in * fan_out);
    for (Index k = 0; k < w.size(); ++k) w[k] = (2.0 * stream.uniform01() - 1.0) * bound;
    params_.push_back({name + ".weight", Tensor({fan_in, fan_out}, std::move(w))});
    if (l > 0 || first_bias) {
      layer.bias = params_.size();
      Eigen::VectorXd b(fan_out);
      for (Index k = 0; k < b.size(); ++k) b[k] = (2.0 * stream.uniform01() - 1.0) * bound;
      params_.push_back({name + ".bias", Tensor({1, fan_out}, std::move(b))});
    }
    layers.push_back(layer);
  }
}

std::vector<double> MvaeModel::default_lambdas() const {
  std::vector<double> out;
  for (const ModalitySpec& m : config_.modalities) out.push_back(m.lambda_weight);
  return out;
}

void MvaeModel::set_parameter(std::size_t i, Tensor value) {
  Parameter& p = params_.at(i);
  if (value.shape() != p.value.shape()) {
    throw DimensionError("parameter " + p.name + " expects " + to_string(p.value.shape()) + ", got " +
                         to_string(value.shape()));
  }
  p.value = std::move(value);
}

std::span<const DenseLayer> MvaeModel::encoder_layers(Index i) const { return encoders_.at(static_cast<std::size_t>(i)); }

std::span<const DenseLayer> MvaeModel::decoder_layers(Index i) const { return decoders_.at(static_cast<std::size_t>(i)); }

MvaeModel MvaeModel::bind(GradTape& tape) const {
  MvaeModel bound = *this;
  for (Parameter& p : bound.params_) p.value = tape.watch(p.value);
  return bound;
}

namespace {

Tensor run_mlp(const MvaeModel& model, std::span<const DenseLayer> layers, Tensor h) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    h = matmul(h, model.parameter(layers[l].weight));
    if (layers[l].bias) h = h + model.parameter(*layers[l].bias);
    if (l + 1 < layers.size()) h = relu(h);
  }
  return h;
}

Tensor as_rows(const Tensor& x) { return x.rank() == 1 ? reshape(x, {1, x.size()}) : x; }

}  // namespace

Tensor one_hot(const Tensor& indices, Index classes) {
  if (indices.rank() != 2 || indices.cols() != 1) {
    throw DimensionError("one_hot expects [B x 1] class indices, got " + to_string(indices.shape()));
  }
  RowMatrix m = RowMatrix::Zero(indices.rows(), classes);
  for (Index r = 0; r < indices.rows(); ++r) {
    const double v = indices[r];
    const auto c = static_cast<Index>(v);
    if (!(v >= 0.0) || static_cast<double>(c) != v || c >= classes) {
      throw DomainError("class index " + std::to_string(v) + " out of range [0, " + std::to_string(classes) + ")");
    }
    m(r, c) = 1.0;
  }
  return Tensor::from_matrix(m);
}

namespace {

Tensor categorical_input(const ModalitySpec& spec, const Tensor& x) {
  if (x.cols() == 1) return one_hot(x, spec.data_dim);
  if (x.cols() == spec.data_dim) return x;
  throw DimensionError("modality '" + spec.name + "' expects class indices or " + std::to_string(spec.data_dim) +
                       " one-hot columns, got " + to_string(x.shape()));
}

}  // namespace

DiagGaussian encode_modality(const MvaeModel& model, Index i, const Tensor& x) {
  const ModalitySpec& spec = model.spec(i);
  Tensor input = as_rows(x);
  if (spec.likelihood == Likelihood::categorical) {
    input = categorical_input(spec, input);
  } else if (input.cols() != spec.data_dim) {
    throw DimensionError("modality '" + spec.name + "' expects " + std::to_string(spec.data_dim) +
                         " columns, got " + to_string(x.shape()));
  }
  const Index d = model.latent_dim();
  const Tensor out = run_mlp(model, model.encoder_layers(i), input);
  Tensor log_var = slice_columns(out, d, d);
  if (model.variant() == Variant::mvae_q) {
    log_var = constrain_variance_for_quotient(log_var, static_cast<int>(model.modality_count()));
  }
  return DiagGaussian(slice_columns(out, 0, d), log_var);
}

Tensor decode_modality(const MvaeModel& model, Index i, const Tensor& z) {
  const Tensor rows = as_rows(z);
  if (rows.cols() != model.latent_dim()) {
    throw DimensionError("decoder expects latent width " + std::to_string(model.latent_dim()) + ", got " +
                         to_string(z.shape()));
  }
  return run_mlp(model, model.decoder_layers(i), rows);
}

Tensor log_likelihood(const ModalitySpec& spec, const Tensor& params, const Tensor& x) {
  const Tensor p = as_rows(params);
  const Tensor obs = as_rows(x);
  switch (spec.likelihood) {
    case Likelihood::bernoulli:
      // x * logit - softplus(logit) == log sigmoid(+-logit)
      return sum(obs * p - softplus(p), 1);
    case Likelihood::categorical:
      return sum(categorical_input(spec, obs) * log_softmax(p, 1), 1);
    case Likelihood::gaussian: {
      static const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
      return sum(square(obs - p) * -0.5 - half_log_2pi, 1);
    }
  }
  throw DomainError("unknown likelihood");
}

Index count_encoder_parameters(const MvaeModel& model, Index modality) {
  Index n = 0;
  for (const DenseLayer& l : model.encoder_layers(modality)) {
    n += model.parameter(l.weight).size();
    if (l.bias) n += model.parameter(*l.bias).size();
  }
  return n;
}

Index count_inference_parameters(const MvaeModel& model) {
  Index n = 0;
  for (Index i = 0; i < model.modality_count(); ++i) n += count_encoder_parameters(model, i);
  return n;
}

}  // namespace mvae
