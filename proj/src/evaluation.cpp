#include "mvae/evaluation.hpp"

#include "mvae/error.hpp"
#include "mvae/objective.hpp"

#include <cmath>

namespace mvae {
namespace {

double lse(const Eigen::VectorXd& w) {
  const double m = w.maxCoeff();
  return m + std::log((w.array() - m).exp().sum());
}

std::vector<std::string> names_of(const LatentModel& model) {
  std::vector<std::string> names;
  for (Index i = 0; i < model.modality_count(); ++i) names.push_back(model.modality_name(i));
  return names;
}

void require_present(const MultimodalBatch& batch, Index row, const SubsetMask& needed) {
  if (!needed.subset_of(batch.masks.at(static_cast<std::size_t>(row)))) {
    throw DomainError("example " + std::to_string(row) + " lacks a modality in " + describe(needed));
  }
}

// Log importance weights of one example for the modalities in `targets`.
Eigen::VectorXd log_weights(const LatentModel& model, const MultimodalBatch& batch, Index row,
                            const SubsetMask& targets, const SubsetMask& proposal, Index n_samples,
                            const RngStream& stream) {
  if (n_samples < 1) throw DomainError("importance sampling needs at least one sample");
  if (proposal.empty() || targets.empty()) throw DomainError("targets and proposal must be non-empty");
  require_present(batch, row, targets);
  require_present(batch, row, proposal);

  RngStream example_stream = stream.split(static_cast<std::uint64_t>(row));
  const DiagGaussian q = model.proposal(batch, row, proposal);
  const Tensor noise = standard_normal(example_stream, {n_samples, model.latent_dim()});
  const Tensor z = q.mean() + exp(q.log_var() * 0.5) * noise;
  const DiagGaussian prior = DiagGaussian::standard({1, model.latent_dim()});

  Eigen::VectorXd w = log_pdf(prior, z).values() - log_pdf(q, z).values();
  for (Index i : targets.indices()) w += model.log_likelihood(i, batch, row, z);
  return w;
}

EstimatorReport importance_estimate(const LatentModel& model, const MultimodalBatch& batch, const SubsetMask& targets,
                                    const SubsetMask& proposal, Index n_samples, const RngStream& stream) {
  batch.validate();
  if (batch.size() == 0) throw DomainError("estimator on an empty batch");
  EstimatorReport report;
  report.n_samples = n_samples;
  report.proposal = "q(z|" + describe(proposal, names_of(model)) + ")";
  report.per_example.resize(batch.size());
  double variance_total = 0.0;
  const double log_n = std::log(static_cast<double>(n_samples));
  for (Index r = 0; r < batch.size(); ++r) {
    const Eigen::VectorXd w = log_weights(model, batch, r, targets, proposal, n_samples, stream);
    report.per_example[r] = lse(w) - log_n;
    if (n_samples >= 2) variance_total += sample_variance(w);
  }
  report.estimate = report.per_example.mean();
  if (n_samples >= 2) report.log_weight_variance = variance_total / static_cast<double>(batch.size());
  return report;
}

}  // namespace

double sample_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) throw DomainError("sample variance needs at least two values");
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

DiagGaussian MvaeLatentModel::proposal(const MultimodalBatch& batch, Index row, const SubsetMask& subset) const {
  const Index rows[] = {row};
  return fuse_posterior(model_, batch.select(rows), subset);
}

Eigen::VectorXd MvaeLatentModel::log_likelihood(Index modality, const MultimodalBatch& batch, Index row,
                                                const Tensor& z) const {
  const Index rows[] = {row};
  const Tensor x = gather_rows(batch.data.at(static_cast<std::size_t>(modality)), rows);
  return mvae::log_likelihood(model_.spec(modality), decode_modality(model_, modality, z), x).values();
}

LinearGaussianLatentModel::LinearGaussianLatentModel(LinearGaussianSpec spec, double mean_shift, double variance_scale)
    : spec_(std::move(spec)), mean_shift_(mean_shift), variance_scale_(variance_scale) {
  spec_.validate();
  if (!(variance_scale > 0.0)) throw DomainError("variance scale must be positive");
}

DiagGaussian LinearGaussianLatentModel::proposal(const MultimodalBatch& batch, Index row,
                                                 const SubsetMask& subset) const {
  Eigen::VectorXd x(spec_.modality_count());
  for (Index i = 0; i < spec_.modality_count(); ++i) {
    x[i] = subset.present(i) ? batch.data.at(static_cast<std::size_t>(i))(row, 0) : 0.0;
  }
  const DiagGaussian exact = spec_.posterior(x, subset);
  if (mean_shift_ == 0.0 && variance_scale_ == 1.0) return exact;
  return DiagGaussian(exact.mean() + mean_shift_, exact.log_var() + std::log(variance_scale_));
}

Eigen::VectorXd LinearGaussianLatentModel::log_likelihood(Index modality, const MultimodalBatch& batch, Index row,
                                                          const Tensor& z) const {
  const double x = batch.data.at(static_cast<std::size_t>(modality))(row, 0);
  Eigen::VectorXd out(z.rows());
  for (Index s = 0; s < z.rows(); ++s) out[s] = spec_.log_likelihood(modality, x, z.at(s, 0));
  return out;
}

EstimatorReport estimate_log_marginal(const LatentModel& model, const MultimodalBatch& batch, Index target,
                                      const SubsetMask& proposal, Index n_samples, const RngStream& stream) {
  return importance_estimate(model, batch, SubsetMask::of(model.modality_count(), {target}), proposal, n_samples,
                             stream);
}

EstimatorReport estimate_log_joint(const LatentModel& model, const MultimodalBatch& batch, const SubsetMask& targets,
                                   const SubsetMask& proposal, Index n_samples, const RngStream& stream) {
  return importance_estimate(model, batch, targets, proposal, n_samples, stream);
}

EstimatorReport estimate_log_conditional(const LatentModel& model, const MultimodalBatch& batch, Index target,
                                         Index given, Index n_samples, Index n_prior_samples,
                                         const RngStream& stream, const std::optional<SubsetMask>& proposal) {
  if (n_prior_samples < 1) throw DomainError("conditional estimate needs prior samples");
  const Index n_mod = model.modality_count();
  const SubsetMask q_mask = proposal.value_or(SubsetMask::of(n_mod, {given}));
  EstimatorReport report =
      importance_estimate(model, batch, SubsetMask::of(n_mod, {target, given}), q_mask, n_samples, stream.split(0));

  const RngStream prior_stream = stream.split(1);
  const double log_n = std::log(static_cast<double>(n_prior_samples));
  for (Index r = 0; r < batch.size(); ++r) {
    RngStream s = prior_stream.split(static_cast<std::uint64_t>(r));
    const Tensor z = standard_normal(s, {n_prior_samples, model.latent_dim()});
    report.per_example[r] -= lse(model.log_likelihood(given, batch, r, z)) - log_n;
  }
  report.estimate = report.per_example.mean();
  return report;
}

std::string to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::marginal: return "marginal";
    case WeightKind::joint: return "joint";
    case WeightKind::conditional: return "conditional";
  }
  return "?";
}

double iw_log_weight_variance(const LatentModel& model, const MultimodalBatch& batch, WeightKind kind,
                              const SubsetMask& proposal, Index n_samples, const RngStream& stream, Index target,
                              Index given) {
  if (n_samples < 2) throw DomainError("log-weight variance needs at least two samples");
  const Index n_mod = model.modality_count();
  const SubsetMask targets =
      kind == WeightKind::marginal ? SubsetMask::of(n_mod, {target}) : SubsetMask::of(n_mod, {target, given});
  double total = 0.0;
  for (Index r = 0; r < batch.size(); ++r) {
    Eigen::VectorXd w = log_weights(model, batch, r, targets, proposal, n_samples, stream);
    if (kind == WeightKind::conditional) {
      RngStream s = stream.split(static_cast<std::uint64_t>(r)).split(1);
      const Tensor z = standard_normal(s, {n_samples, model.latent_dim()});
      w.array() -= lse(model.log_likelihood(given, batch, r, z)) - std::log(static_cast<double>(n_samples));
    }
    total += sample_variance(w);
  }
  return total / static_cast<double>(batch.size());
}

double cross_modality_accuracy(const MvaeModel& model, const MultimodalBatch& batch, Index from, Index to,
                               const RngStream& stream) {
  if (model.spec(to).likelihood != Likelihood::categorical) {
    throw DomainError("cross_modality_accuracy: target modality '" + model.spec(to).name + "' is not categorical");
  }
  batch.validate();
  if (batch.size() == 0) throw DomainError("accuracy on an empty batch");
  const Index n_mod = model.modality_count();
  const DiagGaussian q = fuse_posterior(model, batch, SubsetMask::of(n_mod, {from}));
  RowMatrix noise(batch.size(), model.latent_dim());
  for (Index r = 0; r < batch.size(); ++r) {
    RngStream s = stream.split(static_cast<std::uint64_t>(r));
    for (Index d = 0; d < model.latent_dim(); ++d) noise(r, d) = s.standard_normal();
  }
  const Tensor z = rsample(q, Tensor::from_matrix(noise)).z;
  const Tensor logits = decode_modality(model, to, z);
  const RowMatrix& labels = batch.data.at(static_cast<std::size_t>(to));

  Index hits = 0;
  for (Index r = 0; r < batch.size(); ++r) {
    require_present(batch, r, SubsetMask::of(n_mod, {to}));
    Index best = 0;
    for (Index c = 1; c < logits.cols(); ++c)
      if (logits.at(r, c) > logits.at(r, best)) best = c;
    if (static_cast<double>(best) == labels(r, 0)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

}  // namespace mvae
