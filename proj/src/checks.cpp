#include "mvae/checks.hpp"

#include "mvae/data.hpp"
#include "mvae/error.hpp"
#include "mvae/evaluation.hpp"
#include "mvae/model.hpp"
#include "mvae/numerics/gradcheck.hpp"
#include "mvae/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace mvae {
namespace {

constexpr double kGradStep = 1e-5;
constexpr double kGradTolerance = 1e-4;
constexpr double kPoeL1Tolerance = 1e-3;
constexpr double kQoeTolerance = 1e-10;

double uniform(RngStream& s, double lo, double hi) { return lo + (hi - lo) * s.uniform01(); }

Tensor uniform_tensor(RngStream& s, Shape shape, double lo, double hi) {
  Eigen::VectorXd v(element_count(shape));
  for (auto& x : v) x = uniform(s, lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Values in +-[lo, hi] with random sign, keeping clear of kinks at zero.
Tensor away_from_zero(RngStream& s, Shape shape, double lo, double hi) {
  Eigen::VectorXd v(element_count(shape));
  for (auto& x : v) x = (s.uniform01() < 0.5 ? -1.0 : 1.0) * uniform(s, lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

double normal_log_density(double x, double mean, double var) {
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + (x - mean) * (x - mean) / var);
}

}  // namespace

CheckResult check_poe_grid(const FusionFunction& fuse, Index n_sets, std::uint64_t seed) {
  constexpr Index kGrid = 200001;
  RngStream stream(seed, 0x90e);
  double worst = 0.0;
  Index worst_set = -1;
  for (Index set = 0; set < n_sets; ++set) {
    const Index size = 1 + static_cast<Index>(stream.uniform_index(5));
    const bool with_prior = set % 2 == 0;
    std::vector<DiagGaussian> experts;
    std::vector<double> means, vars;
    for (Index e = 0; e < size; ++e) {
      means.push_back(uniform(stream, -3.0, 3.0));
      const double lv = uniform(stream, -2.0, 2.0);
      vars.push_back(std::exp(lv));
      experts.emplace_back(Tensor::from_values({1}, {means.back()}), Tensor::from_values({1}, {lv}));
    }
    if (with_prior) {
      means.push_back(0.0);
      vars.push_back(1.0);
    }
    const DiagGaussian fused = fuse(experts, with_prior);
    const double f_mean = fused.mean()[0];
    const double f_var = std::exp(fused.log_var()[0]);

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < means.size(); ++i) {
      lo = std::min(lo, means[i] - 12.0 * std::sqrt(vars[i]));
      hi = std::max(hi, means[i] + 12.0 * std::sqrt(vars[i]));
    }
    const double dx = (hi - lo) / static_cast<double>(kGrid - 1);
    Eigen::VectorXd log_product(kGrid);
    for (Index g = 0; g < kGrid; ++g) {
      const double t = lo + dx * static_cast<double>(g);
      double acc = 0.0;
      for (std::size_t i = 0; i < means.size(); ++i) acc += normal_log_density(t, means[i], vars[i]);
      log_product[g] = acc;
    }
    Eigen::VectorXd product = (log_product.array() - log_product.maxCoeff()).exp().matrix();
    auto trapezoid = [dx](const Eigen::VectorXd& y) { return dx * (y.sum() - 0.5 * (y[0] + y[y.size() - 1])); };
    product /= trapezoid(product);

    Eigen::VectorXd diff(kGrid);
    for (Index g = 0; g < kGrid; ++g) {
      const double t = lo + dx * static_cast<double>(g);
      diff[g] = std::abs(product[g] - std::exp(normal_log_density(t, f_mean, f_var)));
    }
    const double l1 = trapezoid(diff);
    if (std::isnan(l1) || l1 > worst) {
      worst = std::isnan(l1) ? std::numeric_limits<double>::infinity() : l1;
      worst_set = set;
    }
  }
  return {"poe_grid_oracle", worst < kPoeL1Tolerance,
          "max L1 " + fmt(worst) + " over " + std::to_string(n_sets) + " sets (set " + std::to_string(worst_set) + ")"};
}

CheckResult check_poe_grid(Index n_sets, std::uint64_t seed) {
  return check_poe_grid(
      [](std::span<const DiagGaussian> experts, bool prior) { return product_of_experts(experts, prior, {1}); },
      n_sets, seed);
}

CheckResult check_qoe_inversion(Index n_pairs, std::uint64_t seed) {
  constexpr Index kDim = 3;
  RngStream stream(seed, 0x90f);
  double worst = 0.0;
  for (Index i = 0; i < n_pairs; ++i) {
    DiagGaussian p(uniform_tensor(stream, {kDim}, -3, 3), uniform_tensor(stream, {kDim}, -2, 2));
    DiagGaussian q(uniform_tensor(stream, {kDim}, -3, 3), uniform_tensor(stream, {kDim}, -2, 2));
    const std::vector<DiagGaussian> pair{p, q};
    const DiagGaussian back = quotient_of_experts(product_of_experts(pair, false), q);
    worst = std::max({worst, (back.mean().values() - p.mean().values()).cwiseAbs().maxCoeff(),
                      (back.variance().values() - p.variance().values()).cwiseAbs().maxCoeff()});
  }

  // Log-variances on a coarse lattice so exact precision ties occur.
  Index mismatches = 0, raised = 0;
  for (Index i = 0; i < n_pairs; ++i) {
    Eigen::VectorXd lv_num(kDim), lv_den(kDim);
    double min_gap = std::numeric_limits<double>::infinity();
    for (Index d = 0; d < kDim; ++d) {
      lv_num[d] = -1.0 + 0.5 * static_cast<double>(stream.uniform_index(5));
      lv_den[d] = -1.0 + 0.5 * static_cast<double>(stream.uniform_index(5));
      min_gap = std::min(min_gap, std::exp(-lv_num[d]) - std::exp(-lv_den[d]));
    }
    DiagGaussian num(Tensor::zeros({kDim}), Tensor::from_vector(lv_num));
    DiagGaussian den(Tensor::zeros({kDim}), Tensor::from_vector(lv_den));
    bool threw = false;
    try {
      quotient_of_experts(num, den);
    } catch (const ConstraintError&) {
      threw = true;
    }
    raised += threw;
    if (threw != (min_gap <= 0.0)) ++mismatches;
  }
  return {"qoe_inversion", worst < kQoeTolerance && mismatches == 0,
          "max recovery error " + fmt(worst) + ", constraint mismatches " + std::to_string(mismatches) + " (" +
              std::to_string(raised) + " raised)"};
}

CheckResult check_quotient_constraint(Index n_draws, std::uint64_t seed) {
  RngStream stream(seed, 0x910);
  std::ostringstream detail;
  bool ok = true;
  for (int n : {2, 3, 5, 19}) {
    Eigen::VectorXd raw(n_draws * n);
    for (Index i = 0; i < raw.size(); ++i) raw[i] = 8.0 * stream.standard_normal();
    // A few rows pinned at the extremes of the encoder's range.
    for (Index c = 0; c < n && n_draws >= 2; ++c) {
      raw[c] = 60.0;
      raw[n + c] = -60.0;
    }
    const Tensor lv = constrain_variance_for_quotient(Tensor({n_draws, n}, raw), n);
    const DiagGaussian g(Tensor::zeros({n_draws, n}), lv);
    const Tensor precision_t = g.precision();
    const auto precision = precision_t.matrix();
    Index violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (Index r = 0; r < n_draws; ++r) {
      const double margin = precision.row(r).sum() - static_cast<double>(n - 1);
      min_margin = std::min(min_margin, margin);
      violations += !(margin > 0.0);
    }
    ok = ok && violations == 0;
    detail << "N=" << n << " violations " << violations << " min margin " << fmt(min_margin) << "; ";
  }
  return {"quotient_constraint", ok, detail.str()};
}

namespace {

struct GradCase {
  std::string name;
  ScalarFunction f;
  Tensor x;
};

// Scalar probe sum(y * w) with weights fixed by `salt`, so every output
// element contributes with a distinct coefficient.
Tensor probe(const Tensor& y, std::uint64_t salt) {
  RngStream s(salt, 0x9a);
  return sum(y * uniform_tensor(s, y.shape(), -1.0, 1.0));
}

MvaeModel tiny_model(Variant variant, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.latent_dim = 2;
  cfg.variant = variant;
  cfg.modalities.push_back({"image", Likelihood::bernoulli, 5, {4}, 1.0, false});
  cfg.modalities.push_back({"label", Likelihood::categorical, 3, {4}, 50.0, true});
  return MvaeModel(cfg, seed);
}

MultimodalBatch tiny_batch(RngStream& s) {
  RowMatrix image(4, 5), label(4, 1);
  for (Index r = 0; r < 4; ++r) {
    for (Index c = 0; c < 5; ++c) image(r, c) = s.uniform01() < 0.5 ? 1.0 : 0.0;
    label(r, 0) = static_cast<double>(s.uniform_index(3));
  }
  return MultimodalBatch::fully_observed({image, label});
}

std::vector<GradCase> op_cases(RngStream& s) {
  std::vector<GradCase> cases;
  const Tensor w = uniform_tensor(s, {4, 2}, -1, 1);
  const Tensor row = uniform_tensor(s, {4}, 0.5, 2.0);
  const Tensor full = uniform_tensor(s, {3, 4}, -2, 2);
  const Tensor positive = uniform_tensor(s, {3, 4}, 0.5, 2.0);
  const Tensor general = uniform_tensor(s, {3, 4}, -2, 2);
  const Tensor kinked = away_from_zero(s, {3, 4}, 0.1, 2.0);

  cases.push_back({"matmul.lhs", [w](const Tensor& x) { return probe(matmul(x, w), 1); }, general});
  cases.push_back({"matmul.rhs", [full](const Tensor& x) { return probe(matmul(full, x), 2); }, w});
  cases.push_back({"add", [row](const Tensor& x) { return probe(x + row, 3); }, general});
  cases.push_back({"add.broadcast", [full](const Tensor& x) { return probe(full + x, 4); }, row});
  cases.push_back({"sub", [row](const Tensor& x) { return probe(x - row, 5); }, general});
  cases.push_back({"sub.broadcast", [full](const Tensor& x) { return probe(full - x, 6); }, row});
  cases.push_back({"mul", [row](const Tensor& x) { return probe(x * row, 7); }, general});
  cases.push_back({"mul.broadcast", [full](const Tensor& x) { return probe(full * x, 8); }, row});
  cases.push_back({"div", [row](const Tensor& x) { return probe(x / row, 9); }, general});
  cases.push_back({"div.broadcast", [full](const Tensor& x) { return probe(full / x, 10); }, row});
  cases.push_back({"neg", [](const Tensor& x) { return probe(-x, 11); }, general});
  cases.push_back({"exp", [](const Tensor& x) { return probe(exp(x), 12); }, general});
  cases.push_back({"log", [](const Tensor& x) { return probe(log(x), 13); }, positive});
  cases.push_back({"sigmoid", [](const Tensor& x) { return probe(sigmoid(x), 14); }, general});
  cases.push_back({"relu", [](const Tensor& x) { return probe(relu(x), 15); }, kinked});
  cases.push_back({"tanh", [](const Tensor& x) { return probe(tanh(x), 16); }, general});
  cases.push_back({"square", [](const Tensor& x) { return probe(square(x), 17); }, general});
  cases.push_back({"softplus", [](const Tensor& x) { return probe(softplus(x), 18); }, general});
  cases.push_back({"sum.all", [](const Tensor& x) { return sum(x) * 0.7; }, general});
  cases.push_back({"sum.axis0", [](const Tensor& x) { return probe(sum(x, 0), 19); }, general});
  cases.push_back({"mean.axis1.keepdim", [](const Tensor& x) { return probe(mean(x, 1, true), 20); }, general});
  cases.push_back({"mean.all", [](const Tensor& x) { return mean(x) * 1.3; }, general});
  cases.push_back({"log_sum_exp", [](const Tensor& x) { return probe(log_sum_exp(x, 1), 21); }, general});
  cases.push_back({"log_softmax", [](const Tensor& x) { return probe(log_softmax(x, 1), 22); }, general});
  cases.push_back({"clamp", [](const Tensor& x) { return probe(clamp(x, -1.05, 1.05), 23); }, kinked});
  cases.push_back({"slice_columns", [](const Tensor& x) { return probe(slice_columns(x, 1, 2), 24); }, general});
  cases.push_back({"reshape", [](const Tensor& x) { return probe(reshape(x, {2, 6}), 25); }, general});
  cases.push_back({"broadcast_to", [](const Tensor& x) { return probe(broadcast_to(x, {3, 4}), 26); }, row});
  return cases;
}

std::vector<GradCase> gaussian_cases(RngStream& s) {
  std::vector<GradCase> cases;
  const Tensor mu = uniform_tensor(s, {3, 4}, -2, 2);
  const Tensor lv = uniform_tensor(s, {3, 4}, -1.5, 1.5);
  const Tensor mu2 = uniform_tensor(s, {3, 4}, -2, 2);
  const Tensor lv2 = uniform_tensor(s, {3, 4}, -1.5, 1.5);
  const Tensor noise = standard_normal(s, {3, 4});
  const Tensor z = uniform_tensor(s, {3, 4}, -2, 2);
  // Denominator precisions strictly below the numerator's.
  const Tensor lv_den = lv + 0.8;

  cases.push_back({"kl.mean", [lv](const Tensor& x) { return probe(kl_to_standard_normal({x, lv}), 30); }, mu});
  cases.push_back({"kl.log_var", [mu](const Tensor& x) { return probe(kl_to_standard_normal({mu, x}), 31); }, lv});
  cases.push_back({"log_pdf.z", [mu, lv](const Tensor& x) { return probe(log_pdf({mu, lv}, x), 32); }, z});
  cases.push_back({"log_pdf.log_var", [mu, z](const Tensor& x) { return probe(log_pdf({mu, x}, z), 33); }, lv});
  cases.push_back({"rsample.mean", [lv, noise](const Tensor& x) { return probe(rsample({x, lv}, noise).z, 34); }, mu});
  cases.push_back({"rsample.log_var", [mu, noise](const Tensor& x) { return probe(rsample({mu, x}, noise).z, 35); }, lv});
  auto poe = [](const Tensor& m1, const Tensor& l1, const Tensor& m2, const Tensor& l2) {
    const std::vector<DiagGaussian> experts{{m1, l1}, {m2, l2}};
    return product_of_experts(experts, true);
  };
  cases.push_back({"poe.mean", [=](const Tensor& x) {
    const DiagGaussian g = poe(x, lv, mu2, lv2);
    return probe(g.mean(), 36) + probe(g.log_var(), 37);
  }, mu});
  cases.push_back({"poe.log_var", [=](const Tensor& x) {
    const DiagGaussian g = poe(mu, x, mu2, lv2);
    return probe(g.mean(), 38) + probe(g.log_var(), 39);
  }, lv});
  cases.push_back({"qoe.numerator", [=](const Tensor& x) {
    const DiagGaussian g = quotient_of_experts({mu, x}, {mu2, lv_den});
    return probe(g.mean(), 40) + probe(g.log_var(), 41);
  }, lv});
  cases.push_back({"qoe.denominator_mean", [=](const Tensor& x) {
    const DiagGaussian g = quotient_of_experts({mu, lv}, {x, lv_den});
    return probe(g.mean(), 42) + probe(g.log_var(), 43);
  }, mu2});
  cases.push_back({"constrain_variance", [](const Tensor& x) {
    return probe(constrain_variance_for_quotient(x, 3), 44);
  }, uniform_tensor(s, {3, 4}, -3, 3)});

  const Tensor bits = Tensor::from_matrix((uniform_tensor(s, {3, 4}, 0, 1).matrix().array() < 0.5).cast<double>().matrix());
  const Tensor classes = Tensor::from_values({3, 1}, {2.0, 0.0, 3.0});
  cases.push_back({"loglik.bernoulli", [bits](const Tensor& x) {
    return probe(log_likelihood({"b", Likelihood::bernoulli, 4, {}, 1.0, false}, x, bits), 45);
  }, mu});
  cases.push_back({"loglik.categorical", [classes](const Tensor& x) {
    return probe(log_likelihood({"c", Likelihood::categorical, 4, {}, 1.0, false}, x, classes), 46);
  }, mu});
  cases.push_back({"loglik.gaussian", [z](const Tensor& x) {
    return probe(log_likelihood({"g", Likelihood::gaussian, 4, {}, 1.0, false}, x, z), 47);
  }, mu});
  return cases;
}

GradCheckReport elbo_gradient(Variant variant, std::uint64_t seed, std::string& worst_param) {
  const MvaeModel base = tiny_model(variant, seed);
  RngStream s(seed, 0x9b);
  const MultimodalBatch batch = tiny_batch(s);
  const Tensor noise = standard_normal(s, {4, 2});
  const ElboOptions options{0.7, {}};
  GradCheckReport worst;
  for (std::size_t p = 0; p < base.parameters().size(); ++p) {
    auto f = [&, p](const Tensor& x) {
      MvaeModel m = base;
      m.set_parameter(p, x);
      return elbo_subset(m, batch, SubsetMask::all(2), options, noise);
    };
    GradCheckReport r = grad_check_report(f, base.parameter(p), kGradStep);
    if (r.max_relative_error >= worst.max_relative_error) {
      worst = std::move(r);
      worst_param = base.parameters()[p].name;
    }
  }
  return worst;
}

}  // namespace

std::vector<CheckResult> check_gradients(std::uint64_t seed) {
  RngStream s(seed, 0x911);
  std::vector<GradCase> cases = op_cases(s);
  for (auto& c : gaussian_cases(s)) cases.push_back(std::move(c));

  std::vector<CheckResult> out;
  double worst = 0.0;
  std::string worst_name;
  Index failures = 0;
  for (const auto& c : cases) {
    const double err = grad_check(c.f, c.x, kGradStep);
    if (err >= worst) {
      worst = err;
      worst_name = c.name;
    }
    if (!(err < kGradTolerance)) {
      ++failures;
      out.push_back({"grad." + c.name, false, "relative error " + fmt(err)});
    }
  }
  out.insert(out.begin(), {"grad_ops", failures == 0,
                           std::to_string(cases.size()) + " ops, worst " + worst_name + " " + fmt(worst)});

  for (Variant v : {Variant::mvae, Variant::mvae_q}) {
    std::string param;
    const GradCheckReport r = elbo_gradient(v, seed, param);
    out.push_back({"grad_elbo_" + to_string(v), r.max_relative_error < kGradTolerance,
                   "worst " + param + " " + fmt(r.max_relative_error)});
  }
  return out;
}

CheckResult check_kl_monte_carlo(Index n_gaussians, Index n_draws, std::uint64_t seed) {
  constexpr Index kDim = 3;
  RngStream stream(seed, 0x912);
  double worst_z = 0.0;
  for (Index g = 0; g < n_gaussians; ++g) {
    const Tensor mu = uniform_tensor(stream, {kDim}, -2, 2);
    const Tensor lv = uniform_tensor(stream, {kDim}, -1.5, 1.5);
    const double kl = kl_to_standard_normal({mu, lv}).item();

    double acc = 0.0, acc_sq = 0.0;
    for (Index i = 0; i < n_draws; ++i) {
      double log_ratio = 0.0;
      for (Index d = 0; d < kDim; ++d) {
        const double sd = std::exp(0.5 * lv[d]);
        const double z = mu[d] + sd * stream.standard_normal();
        log_ratio += normal_log_density(z, mu[d], sd * sd) - normal_log_density(z, 0.0, 1.0);
      }
      acc += log_ratio;
      acc_sq += log_ratio * log_ratio;
    }
    const double n = static_cast<double>(n_draws);
    const double mc = acc / n;
    const double se = std::sqrt((acc_sq / n - mc * mc) / (n - 1.0));
    worst_z = std::max(worst_z, std::abs(mc - kl) / se);
  }
  return {"kl_monte_carlo", worst_z <= 3.0, "max |MC - closed form| = " + fmt(worst_z) + " standard errors"};
}

std::vector<CheckResult> check_linear_gaussian_estimators(Index n_samples, std::uint64_t seed) {
  const LinearGaussianSpec spec{{1.2, -0.8}, {0.5, 0.7}};
  const Dataset data = linear_gaussian_dataset(spec, 8, seed);
  const MultimodalBatch batch = data.to_batch();
  const LinearGaussianLatentModel shifted(spec, 0.25, 1.6);
  const SubsetMask first = SubsetMask::of(2, {0});
  const SubsetMask both = SubsetMask::all(2);

  auto row = [&](Index r) {
    Eigen::VectorXd x(2);
    x << batch.data[0](r, 0), batch.data[1](r, 0);
    return x;
  };
  auto max_error = [&](const EstimatorReport& rep, auto exact) {
    double worst = 0.0;
    for (Index r = 0; r < batch.size(); ++r) worst = std::max(worst, std::abs(rep.per_example[r] - exact(row(r))));
    return worst;
  };

  std::vector<CheckResult> out;
  const RngStream root(seed, 0x913);
  const double marginal_err = max_error(estimate_log_marginal(shifted, batch, 0, first, n_samples, root.split(0)),
                                        [&](const Eigen::VectorXd& x) { return spec.log_marginal(x, first); });
  out.push_back({"estimator_marginal", marginal_err <= 0.05, "max error " + fmt(marginal_err) + " nats"});
  const double joint_err = max_error(estimate_log_joint(shifted, batch, both, both, n_samples, root.split(1)),
                                     [&](const Eigen::VectorXd& x) { return spec.log_marginal(x, both); });
  out.push_back({"estimator_joint", joint_err <= 0.05, "max error " + fmt(joint_err) + " nats"});
  const double cond_err =
      max_error(estimate_log_conditional(shifted, batch, 0, 1, n_samples, n_samples, root.split(2)),
                [&](const Eigen::VectorXd& x) { return spec.log_conditional(x, 0, 1); });
  out.push_back({"estimator_conditional", cond_err <= 0.1, "max error " + fmt(cond_err) + " nats"});

  const LinearGaussianLatentModel exact(spec);
  const double v_marginal = iw_log_weight_variance(exact, batch, WeightKind::marginal, first, 1000, root.split(3));
  const double v_joint = iw_log_weight_variance(exact, batch, WeightKind::joint, both, 1000, root.split(4));
  const double v = std::max(v_marginal, v_joint);
  out.push_back({"exact_proposal_zero_variance", v < 1e-10, "max log-weight variance " + fmt(v)});
  return out;
}

CheckResult check_parameter_counts() {
  const MvaeModel model(reference_mnist_config(), 0);
  const Index image = count_encoder_parameters(model, 0);
  const Index total = count_inference_parameters(model);
  return {"parameter_counts", image == 730240 && total == 1063680,
          "image encoder " + std::to_string(image) + ", inference total " + std::to_string(total)};
}

std::vector<CheckResult> run_all_checks() {
  std::vector<CheckResult> out;
  out.push_back(check_poe_grid());
  out.push_back(check_qoe_inversion());
  out.push_back(check_quotient_constraint());
  for (auto& r : check_gradients()) out.push_back(std::move(r));
  out.push_back(check_kl_monte_carlo());
  for (auto& r : check_linear_gaussian_estimators()) out.push_back(std::move(r));
  out.push_back(check_parameter_counts());
  return out;
}

}  // namespace mvae
