#ifndef MVAE_EVALUATION_HPP
#define MVAE_EVALUATION_HPP

#include "mvae/data.hpp"
#include "mvae/model.hpp"

#include <optional>
#include <string>

namespace mvae {

// What the importance-sampling estimators need from a latent-variable model
// with a standard normal prior.
class LatentModel {
 public:
  virtual ~LatentModel() = default;
  virtual Index latent_dim() const = 0;
  virtual Index modality_count() const = 0;
  virtual std::string modality_name(Index i) const { return std::to_string(i); }
  // q(z | x_S) for one example, shape [1 x D].
  virtual DiagGaussian proposal(const MultimodalBatch& batch, Index row, const SubsetMask& subset) const = 0;
  // log p(x_i | z_s) for every row z_s of `z` ([n x D]).
  virtual Eigen::VectorXd log_likelihood(Index modality, const MultimodalBatch& batch, Index row,
                                         const Tensor& z) const = 0;
};

class MvaeLatentModel final : public LatentModel {
 public:
  explicit MvaeLatentModel(const MvaeModel& model) : model_(model) {}
  Index latent_dim() const override { return model_.latent_dim(); }
  Index modality_count() const override { return model_.modality_count(); }
  std::string modality_name(Index i) const override { return model_.spec(i).name; }
  DiagGaussian proposal(const MultimodalBatch& batch, Index row, const SubsetMask& subset) const override;
  Eigen::VectorXd log_likelihood(Index modality, const MultimodalBatch& batch, Index row,
                                 const Tensor& z) const override;

 private:
  const MvaeModel& model_;
};

// Exact linear-Gaussian model whose proposal is the exact posterior, optionally
// shifted in mean and scaled in variance.
class LinearGaussianLatentModel final : public LatentModel {
 public:
  explicit LinearGaussianLatentModel(LinearGaussianSpec spec, double mean_shift = 0.0, double variance_scale = 1.0);
  Index latent_dim() const override { return 1; }
  Index modality_count() const override { return spec_.modality_count(); }
  DiagGaussian proposal(const MultimodalBatch& batch, Index row, const SubsetMask& subset) const override;
  Eigen::VectorXd log_likelihood(Index modality, const MultimodalBatch& batch, Index row,
                                 const Tensor& z) const override;
  const LinearGaussianSpec& spec() const noexcept { return spec_; }

 private:
  LinearGaussianSpec spec_;
  double mean_shift_;
  double variance_scale_;
};

struct EstimatorReport {
  // Nats per example, averaged over the evaluated examples.
  double estimate = 0.0;
  Index n_samples = 0;
  // Mean per-example unbiased variance of the log weights; absent when n_samples < 2.
  std::optional<double> log_weight_variance;
  std::string proposal;
  Eigen::VectorXd per_example;
};

// log p(x_target) ~= LSE_s(log p(x_t|z_s) + log p(z_s) - log q(z_s)) - log n,
// z_s ~ q(z | x_proposal). Every example draws from stream.split(row).
EstimatorReport estimate_log_marginal(const LatentModel& model, const MultimodalBatch& batch, Index target,
                                      const SubsetMask& proposal, Index n_samples, const RngStream& stream);

// As above with the log weight summing over every modality in `targets`.
EstimatorReport estimate_log_joint(const LatentModel& model, const MultimodalBatch& batch, const SubsetMask& targets,
                                   const SubsetMask& proposal, Index n_samples, const RngStream& stream);

// log p(x_i | x_j) ~= log E_q[p(x_i|z) p(x_j|z) p(z) / q(z)] - log E_p(z)[p(x_j|z)].
// The proposal defaults to q(z | x_j).
EstimatorReport estimate_log_conditional(const LatentModel& model, const MultimodalBatch& batch, Index target,
                                         Index given, Index n_samples, Index n_prior_samples,
                                         const RngStream& stream,
                                         const std::optional<SubsetMask>& proposal = std::nullopt);

enum class WeightKind { marginal, joint, conditional };
std::string to_string(WeightKind kind);

// Mean over examples of the unbiased sample variance of the log weights.
// marginal: log p(x_target, z)/q; joint: log p(x_target, x_given, z)/q;
// conditional: the joint weight minus the per-example log p(x_given) estimate,
// a constant shift that leaves the variance equal to the joint one.
double iw_log_weight_variance(const LatentModel& model, const MultimodalBatch& batch, WeightKind kind,
                              const SubsetMask& proposal, Index n_samples, const RngStream& stream,
                              Index target = 0, Index given = 1);

// One z ~ q(z | x_from) per example, predict argmax of the categorical
// decoder `to` (ties toward the lowest class), return the hit rate.
double cross_modality_accuracy(const MvaeModel& model, const MultimodalBatch& batch, Index from, Index to,
                               const RngStream& stream);

// Unbiased variance of a sample (n >= 2).
double sample_variance(const Eigen::VectorXd& v);

}  // namespace mvae

#endif  // MVAE_EVALUATION_HPP
