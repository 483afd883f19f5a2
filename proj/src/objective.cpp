#include "mvae/objective.hpp"

#include "mvae/error.hpp"

#include <cmath>
#include <map>

namespace mvae {
namespace {

std::vector<double> resolve_lambdas(const MvaeModel& model, const std::vector<double>& lambdas) {
  if (lambdas.empty()) return model.default_lambdas();
  if (static_cast<Index>(lambdas.size()) != model.modality_count()) {
    throw DimensionError("expected " + std::to_string(model.modality_count()) + " lambda weights, got " +
                         std::to_string(lambdas.size()));
  }
  return lambdas;
}

std::vector<Index> rows_where_present(const MultimodalBatch& batch, const SubsetMask& mask) {
  std::vector<Index> rows;
  for (Index r = 0; r < batch.size(); ++r) {
    if (!mask.subset_of(batch.masks[static_cast<std::size_t>(r)])) {
      throw DomainError("example " + std::to_string(r) + " lacks a modality in " + describe(mask));
    }
    rows.push_back(r);
  }
  return rows;
}

// Encoded experts and observed data for one set of rows; absent modalities stay empty.
struct EncodedRows {
  std::vector<std::optional<Tensor>> data;
  std::vector<std::optional<DiagGaussian>> experts;
  Index rows = 0;
};

EncodedRows encode_rows(const MvaeModel& model, const MultimodalBatch& batch, std::span<const Index> rows,
                        const SubsetMask& modalities) {
  EncodedRows out;
  out.rows = static_cast<Index>(rows.size());
  out.data.resize(static_cast<std::size_t>(model.modality_count()));
  out.experts.resize(static_cast<std::size_t>(model.modality_count()));
  for (Index i : modalities.indices()) {
    const auto s = static_cast<std::size_t>(i);
    out.data[s] = gather_rows(batch.data.at(s), rows);
    out.experts[s] = encode_modality(model, i, *out.data[s]);
  }
  return out;
}

DiagGaussian fuse_subset(const MvaeModel& model, const EncodedRows& enc, const SubsetMask& subset) {
  std::vector<DiagGaussian> experts;
  for (Index i : subset.indices()) experts.push_back(*enc.experts[static_cast<std::size_t>(i)]);
  return fuse_experts(model, experts, enc.rows);
}

// Per-example ELBO ([rows]).
Tensor elbo_rows(const MvaeModel& model, const EncodedRows& enc, const SubsetMask& subset,
                 const std::vector<double>& lambdas, double beta, const Tensor& noise) {
  const DiagGaussian q = fuse_subset(model, enc, subset);
  const Tensor z = rsample(q, noise).z;
  std::optional<Tensor> reconstruction;
  for (Index i : subset.indices()) {
    const auto s = static_cast<std::size_t>(i);
    Tensor term = log_likelihood(model.spec(i), decode_modality(model, i, z), *enc.data[s]) * lambdas[s];
    reconstruction = reconstruction ? *reconstruction + term : term;
  }
  return *reconstruction - kl_to_standard_normal(q) * beta;
}

}  // namespace

DiagGaussian fuse_experts(const MvaeModel& model, std::span<const DiagGaussian> experts, Index rows) {
  const Shape shape{rows, model.latent_dim()};
  if (model.variant() == Variant::mvae) return product_of_experts(experts, true, shape);
  if (experts.empty()) throw DomainError("mvae_q posterior needs at least one expert");
  if (experts.size() == 1) return experts.front();
  const DiagGaussian product = product_of_experts(experts, false);
  const double priors = static_cast<double>(experts.size() - 1);
  const DiagGaussian denominator(Tensor::zeros(product.shape()), Tensor::constant(product.shape(), -std::log(priors)));
  return quotient_of_experts(product, denominator);
}

DiagGaussian fuse_posterior(const MvaeModel& model, const MultimodalBatch& batch, const SubsetMask& mask) {
  batch.validate();
  const std::vector<Index> rows = rows_where_present(batch, mask);
  const EncodedRows enc = encode_rows(model, batch, rows, mask);
  return fuse_subset(model, enc, mask);
}

Tensor elbo_subset(const MvaeModel& model, const MultimodalBatch& batch, const SubsetMask& mask,
                   const ElboOptions& options, const Tensor& noise) {
  if (mask.empty()) throw DomainError("elbo_subset needs at least one modality");
  batch.validate();
  const std::vector<Index> rows = rows_where_present(batch, mask);
  const EncodedRows enc = encode_rows(model, batch, rows, mask);
  return mean(elbo_rows(model, enc, mask, resolve_lambdas(model, options.lambdas), options.beta, noise));
}

Tensor elbo_subset(const MvaeModel& model, const MultimodalBatch& batch, const SubsetMask& mask,
                   const ElboOptions& options, RngStream& stream) {
  return elbo_subset(model, batch, mask, options, standard_normal(stream, {batch.size(), model.latent_dim()}));
}

Index available_random_subsets(Index present) {
  if (present <= 2) return 0;
  if (present >= 62) return std::numeric_limits<Index>::max();
  return (Index{1} << present) - present - 2;
}

SubsetMask draw_random_subset(RngStream& stream, const SubsetMask& present) {
  const std::vector<Index> ground = present.indices();
  const auto m = static_cast<Index>(ground.size());
  if (m < 3) throw DomainError("random subsets need at least 3 present modalities");
  const Index size = 2 + static_cast<Index>(stream.uniform_index(static_cast<std::uint64_t>(m - 2)));
  const std::vector<Index> chosen = draw_subset(stream, ground, size);
  return SubsetMask::from_indices(present.modality_count(), chosen);
}

SubSampledObjective sub_sampled_objective(const MvaeModel& model, const MultimodalBatch& batch,
                                          const ObjectiveOptions& options, RngStream& stream) {
  if (options.k < 0) throw DomainError("k must be non-negative");
  if (batch.size() == 0) throw DomainError("sub_sampled_objective on an empty batch");
  batch.validate();
  const std::vector<double> lambdas = resolve_lambdas(model, options.lambdas);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  std::map<std::uint64_t, std::vector<Index>> groups;
  for (Index r = 0; r < batch.size(); ++r) {
    const SubsetMask& m = batch.masks[static_cast<std::size_t>(r)];
    if (m.empty()) throw DomainError("example " + std::to_string(r) + " has no observed modality");
    groups[m.bits()].push_back(r);
  }

  SubSampledObjective result;
  std::optional<Tensor> total;
  for (const auto& [bits, rows] : groups) {
    const SubsetMask present = batch.masks[static_cast<std::size_t>(rows.front())];
    const EncodedRows enc = encode_rows(model, batch, rows, present);
    const Index m = present.count();

    std::vector<SubsetMask> subsets{present};
    if (m > 1) {
      for (Index i : present.indices()) subsets.push_back(SubsetMask::of(present.modality_count(), {i}));
    }
    const Index random_terms = std::min(options.k, available_random_subsets(m));

    const Shape noise_shape{enc.rows, model.latent_dim()};
    std::optional<Tensor> shared_noise;
    if (options.fixed_epsilon) shared_noise = standard_normal(stream, noise_shape);

    for (Index t = 0; t < static_cast<Index>(subsets.size()) + random_terms; ++t) {
      const SubsetMask subset = t < static_cast<Index>(subsets.size())
                                    ? subsets[static_cast<std::size_t>(t)]
                                    : draw_random_subset(stream, present);
      const Tensor noise = shared_noise ? *shared_noise : standard_normal(stream, noise_shape);
      const Tensor row_sum = sum(elbo_rows(model, enc, subset, lambdas, options.beta, noise));
      const Tensor term = row_sum * inv_batch;
      total = total ? *total + term : term;
      result.terms.push_back({subset, enc.rows, row_sum.item() / static_cast<double>(enc.rows)});
    }
  }
  result.value = *total;
  return result;
}

}  // namespace mvae
