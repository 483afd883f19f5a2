#include "mvae/cli/config.hpp"

#include "mvae/error.hpp"

#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>

namespace mvae::cli {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and remembers which keys were consumed so
// that leftovers can be reported.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError(label() + ": missing required key '" + key + "'");
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = at(key);
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key) + ": wrong type (" + std::string(v.type_name()) + ")");
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }

  Index get_count(const std::string& key, Index fallback, Index min) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(path(key) + ": expected an integer");
    const auto n = v.get<std::int64_t>();
    if (n < min) throw ConfigError(path(key) + ": must be >= " + std::to_string(min));
    return static_cast<Index>(n);
  }

  Index require_count(const std::string& key, Index min) {
    at(key);
    return get_count(key, 0, min);
  }

  std::string label() const { return where_.empty() ? "config" : where_; }
  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + path(key) + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

DatasetKind parse_kind(const std::string& s) {
  if (s == "synth_bimodal") return DatasetKind::synth_bimodal;
  if (s == "synth_attributes") return DatasetKind::synth_attributes;
  if (s == "mnist") return DatasetKind::mnist;
  if (s == "linear_gaussian") return DatasetKind::linear_gaussian;
  throw ConfigError("dataset.kind: unknown dataset '" + s + "'");
}

DatasetConfig parse_dataset(const json& j) {
  ObjectReader r(j, "dataset");
  DatasetConfig d;
  d.kind = parse_kind(r.get<std::string>("kind"));
  d.n_train = r.get_count("n_train", d.n_train, 1);
  d.n_test = r.get_count("n_test", d.n_test, 1);
  switch (d.kind) {
    case DatasetKind::synth_attributes:
      d.n_modalities = r.get_count("n_modalities", d.n_modalities, 3);
      d.attribute_flip = r.get<double>("attribute_flip", d.attribute_flip);
      [[fallthrough]];
    case DatasetKind::synth_bimodal:
      d.flip = r.get<double>("flip", d.flip);
      if (!(d.flip >= 0.0 && d.flip <= 0.5)) throw ConfigError("dataset.flip must lie in [0, 0.5]");
      break;
    case DatasetKind::mnist:
      d.train_images = r.get<std::string>("train_images");
      d.train_labels = r.get<std::string>("train_labels");
      d.test_images = r.get<std::string>("test_images");
      d.test_labels = r.get<std::string>("test_labels");
      d.binarize = r.get<std::string>("binarize", d.binarize);
      if (d.binarize != "threshold" && d.binarize != "stochastic" && d.binarize != "none") {
        throw ConfigError("dataset.binarize must be threshold, stochastic or none");
      }
      break;
    case DatasetKind::linear_gaussian:
      d.loadings = r.get<std::vector<double>>("loadings");
      d.noise_variances = r.get<std::vector<double>>("noise_variances");
      LinearGaussianSpec{d.loadings, d.noise_variances}.validate();
      break;
  }
  r.finish();
  return d;
}

TrainConfig parse_train(const json& j) {
  ObjectReader r(j, "train");
  TrainConfig t;
  t.epochs = r.get_count("epochs", t.epochs, 1);
  t.batch_size = r.get_count("batch_size", t.batch_size, 1);
  t.learning_rate = r.get<double>("learning_rate", t.learning_rate);
  t.k = r.get_count("k", t.k, 0);
  t.beta_anneal_epochs = r.get_count("beta_anneal_epochs", t.beta_anneal_epochs, 0);
  t.fixed_epsilon_diagnostic = r.get<bool>("fixed_epsilon_diagnostic", t.fixed_epsilon_diagnostic);
  r.finish();
  t.validate();
  return t;
}

EvalConfig parse_eval(const json& j) {
  ObjectReader r(j, "eval");
  EvalConfig e;
  e.n_samples = r.get_count("n_samples", e.n_samples, 1);
  e.n_prior_samples = r.get_count("n_prior_samples", e.n_prior_samples, 1);
  e.n_examples = r.get_count("n_examples", e.n_examples, 1);
  e.proposals = r.get<std::vector<std::vector<std::string>>>("proposals", e.proposals);
  r.finish();
  return e;
}

}  // namespace

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::synth_bimodal: return "synth_bimodal";
    case DatasetKind::synth_attributes: return "synth_attributes";
    case DatasetKind::mnist: return "mnist";
    case DatasetKind::linear_gaussian: return "linear_gaussian";
  }
  return "?";
}

std::uint64_t parse_seed(const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("seed override '" + text + "' is not a non-negative integer");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError("seed override '" + text + "' is out of range");
  }
}

ModelConfig parse_model_config(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  ModelConfig m;
  m.latent_dim = r.require_count("latent_dim", 1);
  m.variant = parse_variant(r.get<std::string>("variant", "mvae"));
  const json& mods = r.at("modalities");
  if (!mods.is_array()) throw ConfigError(where + ".modalities: expected an array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < mods.size(); ++i) {
    ObjectReader mr(mods[i], where + ".modalities[" + std::to_string(i) + "]");
    ModalitySpec s;
    s.name = mr.get<std::string>("name");
    if (s.name.empty() || !names.insert(s.name).second) {
      throw ConfigError(mr.path("name") + ": names must be non-empty and unique");
    }
    s.likelihood = parse_likelihood(mr.get<std::string>("likelihood"));
    s.data_dim = mr.require_count("data_dim", 1);
    s.hidden_dims = mr.get<std::vector<Index>>("hidden_dims", {});
    s.lambda_weight = mr.get<double>("lambda", 1.0);
    s.embed_first_layer = mr.get<bool>("embed_first_layer", false);
    mr.finish();
    m.modalities.push_back(std::move(s));
  }
  r.finish();
  m.validate();
  return m;
}

RunConfig parse_run_config(const json& j) {
  ObjectReader r(j, "");
  RunConfig c;
  const json& seed = r.at("seed");
  if (!seed.is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
  c.seed = seed.get<std::uint64_t>();
  c.dataset = parse_dataset(r.at("dataset"));
  c.model = parse_model_config(r.at("model"));
  if (r.has("train")) c.train = parse_train(r.at("train"));
  if (r.has("eval")) c.eval = parse_eval(r.at("eval"));
  r.finish();
  c.train.seed = c.seed;
  for (const auto& names : c.eval.proposals) mask_from_names(c.model, names);
  return c;
}

RunConfig load_run_config(const std::string& path, bool honor_env_seed) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  RunConfig c = parse_run_config(j);
  if (honor_env_seed) {
    if (const char* env = std::getenv(kSeedEnvVar); env != nullptr) {
      c.seed = parse_seed(env);
      c.train.seed = c.seed;
    }
  }
  return c;
}

json to_json(const ModelConfig& model) {
  json mods = json::array();
  for (const ModalitySpec& s : model.modalities) {
    mods.push_back({{"name", s.name},
                    {"likelihood", to_string(s.likelihood)},
                    {"data_dim", s.data_dim},
                    {"hidden_dims", s.hidden_dims},
                    {"lambda", s.lambda_weight},
                    {"embed_first_layer", s.embed_first_layer}});
  }
  return {{"latent_dim", model.latent_dim}, {"variant", to_string(model.variant)}, {"modalities", mods}};
}

json to_json(const RunConfig& c) {
  const DatasetConfig& d = c.dataset;
  json dataset = {{"kind", to_string(d.kind)}, {"n_train", d.n_train}, {"n_test", d.n_test}};
  switch (d.kind) {
    case DatasetKind::synth_attributes:
      dataset["n_modalities"] = d.n_modalities;
      dataset["attribute_flip"] = d.attribute_flip;
      [[fallthrough]];
    case DatasetKind::synth_bimodal:
      dataset["flip"] = d.flip;
      break;
    case DatasetKind::mnist:
      dataset["train_images"] = d.train_images;
      dataset["train_labels"] = d.train_labels;
      dataset["test_images"] = d.test_images;
      dataset["test_labels"] = d.test_labels;
      dataset["binarize"] = d.binarize;
      break;
    case DatasetKind::linear_gaussian:
      dataset["loadings"] = d.loadings;
      dataset["noise_variances"] = d.noise_variances;
      break;
  }
  const TrainConfig& t = c.train;
  json train = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"k", t.k},
                {"beta_anneal_epochs", t.beta_anneal_epochs},
                {"fixed_epsilon_diagnostic", t.fixed_epsilon_diagnostic}};
  json proposals = json::array();
  for (const SubsetMask& m : resolved_proposals(c)) {
    json names = json::array();
    for (Index i : m.indices()) names.push_back(c.model.modalities[static_cast<std::size_t>(i)].name);
    proposals.push_back(names);
  }
  json eval = {{"n_samples", c.eval.n_samples},
               {"n_prior_samples", c.eval.n_prior_samples},
               {"n_examples", c.eval.n_examples},
               {"proposals", proposals}};
  return {{"seed", c.seed}, {"dataset", dataset}, {"model", to_json(c.model)}, {"train", train}, {"eval", eval}};
}

SubsetMask mask_from_names(const ModelConfig& model, const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("eval.proposals: a proposal needs at least one modality");
  SubsetMask mask(model.modality_count());
  for (const std::string& n : names) {
    Index found = -1;
    for (Index i = 0; i < model.modality_count(); ++i)
      if (model.modalities[static_cast<std::size_t>(i)].name == n) found = i;
    if (found < 0) throw ConfigError("eval.proposals: unknown modality '" + n + "'");
    mask.set(found, true);
  }
  return mask;
}

std::vector<SubsetMask> resolved_proposals(const RunConfig& config) {
  std::vector<SubsetMask> out;
  if (config.eval.proposals.empty()) {
    const Index m = config.model.modality_count();
    for (Index i = 0; i < m; ++i) out.push_back(SubsetMask::of(m, {i}));
    if (m > 1) out.push_back(SubsetMask::all(m));
    return out;
  }
  for (const auto& names : config.eval.proposals) out.push_back(mask_from_names(config.model, names));
  return out;
}

namespace {

void check_matches(const ModelConfig& model, const Dataset& data) {
  if (static_cast<Index>(data.modalities.size()) != model.modality_count()) {
    throw ConfigError("model has " + std::to_string(model.modality_count()) + " modalities but the dataset has " +
                      std::to_string(data.modalities.size()));
  }
  for (std::size_t i = 0; i < data.modalities.size(); ++i) {
    const ModalitySpec& s = model.modalities[i];
    const RowMatrix& x = data.modalities[i];
    if (s.likelihood == Likelihood::categorical) {
      if (x.cols() != 1) throw ConfigError("modality '" + s.name + "' is categorical but the data is not a class index");
      if (x.size() > 0 && x.maxCoeff() >= static_cast<double>(s.data_dim)) {
        throw ConfigError("modality '" + s.name + "': data_dim " + std::to_string(s.data_dim) +
                          " is smaller than the number of classes in the data");
      }
    } else if (x.cols() != s.data_dim) {
      throw ConfigError("modality '" + s.name + "': data_dim " + std::to_string(s.data_dim) + " but the data has " +
                        std::to_string(x.cols()) + " columns");
    }
  }
}

Dataset load_mnist_split(const DatasetConfig& d, const std::string& images, const std::string& labels, Index limit,
                         std::uint64_t seed) {
  Dataset data = load_mnist(images, labels);
  if (data.size() > limit) data = data.slice(0, limit);
  if (d.binarize != "none") {
    RngStream stream(seed, 0xb17);
    const BinarizeMode mode = d.binarize == "threshold" ? BinarizeMode::threshold : BinarizeMode::stochastic;
    data.modalities[0] = binarize(Tensor::from_matrix(data.modalities[0]), mode, &stream).matrix();
  }
  return data;
}

}  // namespace

DatasetPair load_datasets(const RunConfig& config) {
  const DatasetConfig& d = config.dataset;
  const std::uint64_t test_seed = config.seed + 1000;
  DatasetPair out;
  switch (d.kind) {
    case DatasetKind::synth_bimodal:
      out.train = synth_bimodal(d.n_train, d.flip, config.seed);
      out.test = synth_bimodal(d.n_test, d.flip, test_seed);
      break;
    case DatasetKind::synth_attributes:
      out.train = synth_attributes(d.n_train, d.n_modalities, config.seed, d.attribute_flip);
      out.test = synth_attributes(d.n_test, d.n_modalities, test_seed, d.attribute_flip);
      break;
    case DatasetKind::mnist:
      out.train = load_mnist_split(d, d.train_images, d.train_labels, d.n_train, config.seed);
      out.test = load_mnist_split(d, d.test_images, d.test_labels, d.n_test, test_seed);
      break;
    case DatasetKind::linear_gaussian: {
      const LinearGaussianSpec spec{d.loadings, d.noise_variances};
      out.train = linear_gaussian_dataset(spec, d.n_train, config.seed);
      out.test = linear_gaussian_dataset(spec, d.n_test, test_seed);
      break;
    }
  }
  check_matches(config.model, out.train);
  return out;
}

}  // namespace mvae::cli
