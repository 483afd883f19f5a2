#ifndef MVAE_CLI_COMMANDS_HPP
#define MVAE_CLI_COMMANDS_HPP

#include "mvae/cli/config.hpp"
#include "mvae/training.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mvae::cli {

TrainResult run_training(const RunConfig& config, const Dataset& train_set);

struct MetricRow {
  std::string estimator;  // marginal:<target>, joint:<all>, conditional:<target>|<given>
  std::string proposal;
  double estimate = 0.0;
  Index n_samples = 0;
  std::optional<double> log_weight_variance;
};

// Every configured proposal crossed with the marginal (first modality),
// joint and, for two or more modalities, conditional (first given second)
// estimators, on the first eval.n_examples test examples.
std::vector<MetricRow> run_evaluation(const MvaeModel& model, const RunConfig& config, const Dataset& test_set);

// First modality to the first categorical modality after it.
double label_accuracy(const MvaeModel& model, const RunConfig& config, const Dataset& test_set);

struct WeakSweepRow {
  double fraction = 0.0;
  Index paired_count = 0;
  double accuracy = 0.0;
};

std::vector<WeakSweepRow> run_weak_sweep(const RunConfig& config, const std::vector<double>& fractions);

std::string history_csv(const TrainHistory& history, std::uint64_t seed);
std::string metrics_csv(const std::vector<MetricRow>& rows, std::uint64_t seed);
std::string weaksweep_csv(const std::vector<WeakSweepRow>& rows, std::uint64_t seed);

// Command entry points: 0 on success; failures print "error: ..." to `err`
// and return 1.
int cmd_train(const std::string& config_path, const std::string& out_dir, std::ostream& out, std::ostream& err);
int cmd_eval(const std::string& checkpoint_path, const std::string& config_path, const std::string& out_dir,
             std::ostream& out, std::ostream& err);
int cmd_weaksweep(const std::string& config_path, const std::vector<double>& fractions, const std::string& out_dir,
                  std::ostream& out, std::ostream& err);
int cmd_check(std::ostream& out, std::ostream& err);

}  // namespace mvae::cli

#endif  // MVAE_CLI_COMMANDS_HPP
