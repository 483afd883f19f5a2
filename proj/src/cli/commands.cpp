#include "mvae/cli/commands.hpp"

#include "mvae/checks.hpp"
#include "mvae/cli/checkpoint.hpp"
#include "mvae/evaluation.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace mvae::cli {

namespace {

constexpr std::uint64_t kEvalStream = 0xe7a1;
constexpr std::uint64_t kAccuracyStream = 0xacc;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::filesystem::path prepare_out_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

std::vector<std::string> names_of(const ModelConfig& model) {
  std::vector<std::string> names;
  for (const ModalitySpec& s : model.modalities) names.push_back(s.name);
  return names;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    body();
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

TrainResult run_training(const RunConfig& config, const Dataset& train_set) {
  return train(MvaeModel(config.model, config.seed), train_set.to_batch(), config.train);
}

std::vector<MetricRow> run_evaluation(const MvaeModel& model, const RunConfig& config, const Dataset& test_set) {
  const Dataset data = test_set.slice(0, std::min(config.eval.n_examples, test_set.size()));
  const MultimodalBatch batch = data.to_batch();
  const MvaeLatentModel latent(model);
  const std::vector<std::string> names = names_of(config.model);
  const Index m = config.model.modality_count();
  const Index n = config.eval.n_samples;
  const RngStream root(config.seed, kEvalStream);
  std::string joined = names[0];
  for (Index i = 1; i < m; ++i) joined += "+" + names[static_cast<std::size_t>(i)];

  std::vector<MetricRow> rows;
  const std::vector<SubsetMask> proposals = resolved_proposals(config);
  for (std::size_t p = 0; p < proposals.size(); ++p) {
    const SubsetMask& q = proposals[p];
    const std::string label = describe(q, names);
    const RngStream stream = root.split(p);
    auto push = [&](std::string estimator, const EstimatorReport& r) {
      rows.push_back({std::move(estimator), label, r.estimate, r.n_samples, r.log_weight_variance});
    };
    push("marginal:" + names[0], estimate_log_marginal(latent, batch, 0, q, n, stream.split(0)));
    push("joint:" + joined, estimate_log_joint(latent, batch, SubsetMask::all(m), q, n, stream.split(1)));
    if (m >= 2) {
      push("conditional:" + names[0] + "|" + names[1],
           estimate_log_conditional(latent, batch, 0, 1, n, config.eval.n_prior_samples, stream.split(2), q));
    }
  }
  return rows;
}

double label_accuracy(const MvaeModel& model, const RunConfig& config, const Dataset& test_set) {
  for (Index j = 1; j < config.model.modality_count(); ++j) {
    if (config.model.modalities[static_cast<std::size_t>(j)].likelihood == Likelihood::categorical) {
      return cross_modality_accuracy(model, test_set.to_batch(), 0, j, RngStream(config.seed, kAccuracyStream));
    }
  }
  throw ConfigError("accuracy needs a categorical modality after the first");
}

std::vector<WeakSweepRow> run_weak_sweep(const RunConfig& config, const std::vector<double>& fractions) {
  if (config.model.modality_count() != 2) throw ConfigError("weaksweep needs a bimodal dataset");
  if (fractions.empty()) throw ConfigError("weaksweep needs at least one fraction");
  const DatasetPair data = load_datasets(config);
  std::vector<WeakSweepRow> rows;
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("fraction " + num(f) + " outside [0, 1]");
    const WeakSplit split = make_weak_split(data.train.to_batch(), f, config.seed);
    const TrainResult result = train(MvaeModel(config.model, config.seed), split.pool(), config.train);
    rows.push_back({f, split.paired.size(), label_accuracy(result.model, config, data.test)});
  }
  return rows;
}

std::string history_csv(const TrainHistory& history, std::uint64_t seed) {
  std::string s = "epoch,objective,beta,seconds,seed\n";
  for (const EpochRecord& e : history.epochs) {
    s += std::to_string(e.epoch) + "," + num(e.objective) + "," + num(e.beta) + "," + num(e.seconds) + "," +
         std::to_string(seed) + "\n";
  }
  return s;
}

std::string metrics_csv(const std::vector<MetricRow>& rows, std::uint64_t seed) {
  std::string s = "estimator,proposal,estimate,n_samples,log_weight_variance,seed\n";
  for (const MetricRow& r : rows) {
    s += r.estimator + "," + r.proposal + "," + num(r.estimate) + "," + std::to_string(r.n_samples) + "," +
         (r.log_weight_variance ? num(*r.log_weight_variance) : std::string()) + "," + std::to_string(seed) + "\n";
  }
  return s;
}

std::string weaksweep_csv(const std::vector<WeakSweepRow>& rows, std::uint64_t seed) {
  std::string s = "fraction,paired_count,accuracy,seed\n";
  for (const WeakSweepRow& r : rows) {
    s += num(r.fraction) + "," + std::to_string(r.paired_count) + "," + num(r.accuracy) + "," +
         std::to_string(seed) + "\n";
  }
  return s;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_run_config(config_path);
    const DatasetPair data = load_datasets(config);
    const TrainResult result = run_training(config, data.train);
    const auto dir = prepare_out_dir(out_dir);
    save_checkpoint(result.model, (dir / "model.ckpt").string());
    write_file(dir / "history.csv", history_csv(result.history, config.seed));
    write_file(dir / "config.resolved.json", to_json(config).dump(2) + "\n");
    const EpochRecord& last = result.history.epochs.back();
    out << "trained " << config.train.epochs << " epochs on " << data.train.size() << " examples (seed "
        << config.seed << "), final objective " << num(last.objective) << "\n";
  });
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path, const std::string& out_dir,
             std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_run_config(config_path);
    const MvaeModel model = load_checkpoint(checkpoint_path);
    if (to_json(model.config()) != to_json(config.model)) {
      throw ConfigError("checkpoint '" + checkpoint_path + "' does not match the config's model block");
    }
    const DatasetPair data = load_datasets(config);
    const std::vector<MetricRow> rows = run_evaluation(model, config, data.test);
    const auto dir = prepare_out_dir(out_dir);
    write_file(dir / "metrics.csv", metrics_csv(rows, config.seed));
    for (const MetricRow& r : rows) out << r.estimator << " under q(z|" << r.proposal << "): " << num(r.estimate) << "\n";
  });
}

int cmd_weaksweep(const std::string& config_path, const std::vector<double>& fractions, const std::string& out_dir,
                  std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig config = load_run_config(config_path);
    const std::vector<WeakSweepRow> rows = run_weak_sweep(config, fractions);
    const auto dir = prepare_out_dir(out_dir);
    write_file(dir / "weaksweep.csv", weaksweep_csv(rows, config.seed));
    for (const WeakSweepRow& r : rows) {
      out << "fraction " << num(r.fraction) << " (" << r.paired_count << " paired): accuracy " << num(r.accuracy)
          << "\n";
    }
  });
}

int cmd_check(std::ostream& out, std::ostream& err) {
  bool all = true;
  const int status = guarded(err, [&] {
    for (const CheckResult& r : run_all_checks()) {
      out << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
      all = all && r.passed;
    }
  });
  return status != 0 || !all ? 1 : 0;
}

}  // namespace mvae::cli
