#ifndef MVAE_CLI_CONFIG_HPP
#define MVAE_CLI_CONFIG_HPP

#include "mvae/data.hpp"
#include "mvae/model.hpp"
#include "mvae/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mvae::cli {

inline constexpr const char* kSeedEnvVar = "MVAE_SEED";

enum class DatasetKind { synth_bimodal, synth_attributes, mnist, linear_gaussian };
std::string to_string(DatasetKind kind);

struct DatasetConfig {
  DatasetKind kind = DatasetKind::synth_bimodal;
  Index n_train = 2000;
  Index n_test = 1000;
  // synth_bimodal and synth_attributes
  double flip = 0.05;
  // synth_attributes
  Index n_modalities = 3;
  double attribute_flip = 0.05;
  // mnist
  std::string train_images, train_labels, test_images, test_labels;
  std::string binarize = "threshold";  // threshold | stochastic | none
  // linear_gaussian
  std::vector<double> loadings;
  std::vector<double> noise_variances;
};

struct EvalConfig {
  Index n_samples = 1000;
  Index n_prior_samples = 1000;
  Index n_examples = 200;
  // Modality names per proposal; empty means every singleton plus the full set.
  std::vector<std::vector<std::string>> proposals;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
};

// Strict parse: unknown keys at any level raise ConfigError naming the key
// path. Missing optional fields take the defaults above. The training seed
// always equals the run seed.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path, bool honor_env_seed = true);

// Every field, defaults included.
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const ModelConfig& model);
ModelConfig parse_model_config(const nlohmann::json& j, const std::string& where = "model");

// Applies an override such as the MVAE_SEED value; throws ConfigError when it
// is not a non-negative integer.
std::uint64_t parse_seed(const std::string& text);

struct DatasetPair {
  Dataset train;
  Dataset test;
};

// Train data uses the run seed, test data seed + 1000. Throws ConfigError if
// the model block does not describe the dataset's modalities.
DatasetPair load_datasets(const RunConfig& config);

// Mask of the named modalities.
SubsetMask mask_from_names(const ModelConfig& model, const std::vector<std::string>& names);
std::vector<SubsetMask> resolved_proposals(const RunConfig& config);

}  // namespace mvae::cli

#endif  // MVAE_CLI_CONFIG_HPP
