#include "mvae/training.hpp"

#include "mvae/error.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace mvae {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (k < 0) throw ConfigError("k must be >= 0");
  if (beta_anneal_epochs < 0 || beta_anneal_epochs > epochs) {
    throw ConfigError("beta_anneal_epochs must lie in [0, epochs]");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
}

double beta_schedule(Index epoch, const TrainConfig& config) {
  if (config.beta_anneal_epochs == 0) return 1.0;
  return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(config.beta_anneal_epochs));
}

TrainResult train(const MvaeModel& initial, const MultimodalBatch& dataset, const TrainConfig& config) {
  config.validate();
  dataset.validate();
  if (dataset.modality_count() != initial.modality_count()) {
    throw DimensionError("dataset has " + std::to_string(dataset.modality_count()) + " modalities, model has " +
                         std::to_string(initial.modality_count()));
  }
  if (dataset.size() == 0) throw DomainError("training on an empty dataset");

  TrainResult result{initial, {}};
  MvaeModel& model = result.model;
  std::vector<AdamState> states(model.parameters().size());
  const AdamOptions adam{config.learning_rate, 0.9, 0.999, 1e-8};
  const RngStream root(config.seed, 0x7a1e);

  std::vector<std::string> names;
  for (const ModalitySpec& m : model.config().modalities) names.push_back(m.name);

  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    RngStream epoch_stream = root.split(static_cast<std::uint64_t>(epoch));
    RngStream shuffle_stream = epoch_stream.split(0);
    const std::vector<Index> order = permutation(shuffle_stream, dataset.size());

    EpochRecord record;
    record.epoch = epoch;
    record.beta = beta_schedule(epoch, config);
    std::map<std::string, std::pair<double, Index>> term_acc;
    double objective_acc = 0.0;

    const ObjectiveOptions options{config.k, record.beta, config.lambdas, config.fixed_epsilon_diagnostic};
    Index batch_index = 0;
    for (Index begin = 0; begin < dataset.size(); begin += config.batch_size, ++batch_index) {
      const Index end = std::min(dataset.size(), begin + config.batch_size);
      const std::vector<Index> rows(order.begin() + begin, order.begin() + end);
      const MultimodalBatch batch = dataset.select(rows);
      RngStream step_stream = epoch_stream.split(1 + static_cast<std::uint64_t>(batch_index));

      GradTape tape;
      GradientMap grads;
      SubSampledObjective objective;
      {
        TapeScope scope(tape);
        const MvaeModel bound = model.bind(tape);
        try {
          objective = sub_sampled_objective(bound, batch, options, step_stream);
        } catch (const NumericError& e) {
          throw NumericError("non-finite objective at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + ": " + e.what());
        }
        grads = tape.backward(-objective.value);
        for (std::size_t p = 0; p < bound.parameters().size(); ++p) {
          model.set_parameter(p, adam_step(model.parameter(p), grads[bound.parameter(p)], states[p], adam));
        }
      }

      objective_acc += objective.value.item() * static_cast<double>(batch.size());
      for (const ObjectiveTerm& t : objective.terms) {
        auto& [total, count] = term_acc[describe(t.subset, names)];
        total += t.mean_elbo;
        count += 1;
      }
    }

    record.objective = objective_acc / static_cast<double>(dataset.size());
    for (const auto& [label, acc] : term_acc) record.term_means[label] = acc.first / static_cast<double>(acc.second);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(std::move(record));
  }
  return result;
}

MultimodalBatch WeakSplit::pool() const {
  const MultimodalBatch parts[] = {paired, first_only, second_only};
  return concatenate(parts);
}

WeakSplit make_weak_split(const MultimodalBatch& dataset, double fraction_paired, std::uint64_t seed) {
  if (dataset.modality_count() != 2) throw DomainError("make_weak_split needs a bimodal dataset");
  if (!(fraction_paired >= 0.0 && fraction_paired <= 1.0)) throw DomainError("fraction_paired must lie in [0, 1]");
  dataset.validate();
  const Index n = dataset.size();
  const auto n_paired = static_cast<Index>(std::floor(fraction_paired * static_cast<double>(n)));
  const Index rest = n - n_paired;
  const Index n_first = (rest + 1) / 2;

  const RngStream root(seed, 0x3eac);
  RngStream order_stream = root.split(0);
  RngStream first_stream = root.split(1);
  RngStream second_stream = root.split(2);
  const std::vector<Index> order = permutation(order_stream, n);

  WeakSplit split;
  const std::vector<Index> paired_rows(order.begin(), order.begin() + n_paired);
  split.paired = dataset.select(paired_rows);
  for (SubsetMask& m : split.paired.masks) m = SubsetMask::all(2);

  auto unpaired = [&](Index begin, Index count, RngStream& stream, Index keep, std::vector<Index>& source) {
    const std::vector<Index> perm = permutation(stream, count);
    for (Index p : perm) source.push_back(order[static_cast<std::size_t>(begin + p)]);
    MultimodalBatch b = dataset.select(source);
    b.data[static_cast<std::size_t>(1 - keep)].setConstant(std::numeric_limits<double>::quiet_NaN());
    for (SubsetMask& m : b.masks) m = SubsetMask::of(2, {keep});
    return b;
  };
  split.first_only = unpaired(n_paired, n_first, first_stream, 0, split.first_source);
  split.second_only = unpaired(n_paired + n_first, rest - n_first, second_stream, 1, split.second_source);
  return split;
}

MultimodalBatch random_modality_dropout(const MultimodalBatch& batch, double p_keep, RngStream& stream) {
  if (!(p_keep > 0.0 && p_keep <= 1.0)) throw DomainError("p_keep must lie in (0, 1]");
  batch.validate();
  std::vector<Index> kept_rows;
  std::vector<SubsetMask> kept_masks;
  for (Index r = 0; r < batch.size(); ++r) {
    SubsetMask mask = batch.masks[static_cast<std::size_t>(r)];
    for (Index i : mask.indices()) {
      if (!(stream.uniform01() < p_keep)) mask.set(i, false);
    }
    if (!mask.empty()) {
      kept_rows.push_back(r);
      kept_masks.push_back(mask);
    }
  }
  MultimodalBatch out = batch.select(kept_rows);
  out.masks = std::move(kept_masks);
  return out;
}

}  // namespace mvae
