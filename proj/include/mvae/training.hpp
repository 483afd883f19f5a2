#ifndef MVAE_TRAINING_HPP
#define MVAE_TRAINING_HPP

#include "mvae/numerics/adam.hpp"
#include "mvae/objective.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mvae {

struct TrainConfig {
  Index epochs = 1;
  Index batch_size = 100;
  double learning_rate = 1e-3;
  Index k = 0;
  Index beta_anneal_epochs = 0;
  // Empty means the model's per-modality weights.
  std::vector<double> lambdas;
  std::uint64_t seed = 0;
  bool fixed_epsilon_diagnostic = false;

  void validate() const;
};

struct EpochRecord {
  Index epoch = 0;
  // Example-weighted mean of the per-batch objective.
  double objective = 0.0;
  double beta = 0.0;
  double seconds = 0.0;
  // Mean ELBO per subset label, averaged over the terms seen this epoch.
  std::map<std::string, double> term_means;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  MvaeModel model;
  TrainHistory history;
};

// min(1, epoch / anneal_epochs); 1 when anneal_epochs == 0.
double beta_schedule(Index epoch, const TrainConfig& config);

// Seeded shuffled minibatches; per batch the sub-sampled objective is
// maximized with one Adam step on every parameter. Throws NumericError
// naming the epoch and batch if the objective is not finite.
TrainResult train(const MvaeModel& initial, const MultimodalBatch& dataset, const TrainConfig& config);

struct WeakSplit {
  MultimodalBatch paired;
  MultimodalBatch first_only;
  MultimodalBatch second_only;
  // Original example index behind each row of the unpaired sets.
  std::vector<Index> first_source;
  std::vector<Index> second_source;

  // All three sets in one pool.
  MultimodalBatch pool() const;
};

// Keeps floor(fraction * n) examples paired; the remaining r are split
// ceil(r/2) / floor(r/2) into modality-0-only and modality-1-only sets, each
// independently permuted so no pairing survives. Absent entries hold NaN.
WeakSplit make_weak_split(const MultimodalBatch& dataset, double fraction_paired, std::uint64_t seed);

// Each present modality survives with probability p_keep; examples left with
// nothing observed are removed.
MultimodalBatch random_modality_dropout(const MultimodalBatch& batch, double p_keep, RngStream& stream);

}  // namespace mvae

#endif  // MVAE_TRAINING_HPP
