#ifndef MVAE_OBJECTIVE_HPP
#define MVAE_OBJECTIVE_HPP

#include "mvae/model.hpp"

#include <optional>
#include <vector>

namespace mvae {

// Joint posterior from already-encoded experts. mvae: product with the prior
// expert. mvae_q: product of the experts divided by (|experts| - 1) standard
// normal priors.
DiagGaussian fuse_experts(const MvaeModel& model, std::span<const DiagGaussian> experts, Index rows);

// q(z | X) for the modalities in `mask`, which must be present in every row.
// An empty mask yields the prior (mvae only).
DiagGaussian fuse_posterior(const MvaeModel& model, const MultimodalBatch& batch, const SubsetMask& mask);

struct ElboOptions {
  double beta = 1.0;
  // Per-modality reconstruction weights; empty means the model's defaults.
  std::vector<double> lambdas;
};

// Single-sample reparameterized ELBO over `mask`, averaged over the batch:
// sum_{i in X} lambda_i log p(x_i | z) - beta KL[q(z|X) || p(z)].
Tensor elbo_subset(const MvaeModel& model, const MultimodalBatch& batch, const SubsetMask& mask,
                   const ElboOptions& options, const Tensor& noise);
Tensor elbo_subset(const MvaeModel& model, const MultimodalBatch& batch, const SubsetMask& mask,
                   const ElboOptions& options, RngStream& stream);

struct ObjectiveOptions {
  Index k = 0;
  double beta = 1.0;
  std::vector<double> lambdas;
  // One noise draw shared by every term of an example group.
  bool fixed_epsilon = false;
};

struct ObjectiveTerm {
  SubsetMask subset;
  Index examples = 0;
  double mean_elbo = 0.0;
};

struct SubSampledObjective {
  // Sum of terms, each contributing sum_rows(ELBO) / batch size.
  Tensor value;
  std::vector<ObjectiveTerm> terms;
};

// Number of subsets of m present modalities that are neither the full set
// nor a singleton: 2^m - m - 2 (0 when m <= 2), saturating.
Index available_random_subsets(Index present);

// Uniform size in {2, ..., m-1}, then a uniform subset of that size.
SubsetMask draw_random_subset(RngStream& stream, const SubsetMask& present);

// Per group of examples sharing a presence pattern with m modalities: the
// joint ELBO, the m singleton ELBOs (when m > 1), and
// min(k, available_random_subsets(m)) random-subset ELBOs.
SubSampledObjective sub_sampled_objective(const MvaeModel& model, const MultimodalBatch& batch,
                                          const ObjectiveOptions& options, RngStream& stream);

}  // namespace mvae

#endif  // MVAE_OBJECTIVE_HPP
