#include "mvae/gaussian.hpp"

#include "mvae/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace mvae {
namespace {

// Upper bound on sigmoid(raw) inside the quotient constraint. Without it
// sigmoid saturates to exactly 1.0 in double precision and the strict
// inequality degenerates to equality.
constexpr double kSigmoidCeiling = 1.0 - 1e-9;

void require_same_shape(const DiagGaussian& a, const DiagGaussian& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": mismatched expert shapes " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

}  // namespace

DiagGaussian::DiagGaussian(Tensor mean, Tensor log_var) : mean_(std::move(mean)) {
  if (mean_.shape() != log_var.shape() || mean_.rank() == 0) {
    throw DimensionError("DiagGaussian: mean " + to_string(mean_.shape()) + " and log_var " +
                         to_string(log_var.shape()) + " must share a non-scalar shape");
  }
  log_var_ = clamp(log_var, kMinLogVar, kMaxLogVar);
}

DiagGaussian DiagGaussian::standard(const Shape& shape) {
  return DiagGaussian(Tensor::zeros(shape), Tensor::zeros(shape));
}

DiagGaussian product_of_experts(std::span<const DiagGaussian> experts, bool include_prior,
                                const Shape& prior_shape) {
  if (experts.empty()) {
    if (!include_prior) throw DimensionError("product_of_experts: no experts and no prior");
    if (prior_shape.empty()) throw DimensionError("product_of_experts: prior-only fusion needs a shape");
    return DiagGaussian::standard(prior_shape);
  }
  for (const DiagGaussian& e : experts) require_same_shape(experts.front(), e, "product_of_experts");

  Tensor precision_sum = experts.front().precision();
  Tensor weighted_mean = experts.front().mean() * precision_sum;
  for (std::size_t i = 1; i < experts.size(); ++i) {
    Tensor t = experts[i].precision();
    precision_sum = precision_sum + t;
    weighted_mean = weighted_mean + experts[i].mean() * t;
  }
  if (include_prior) {
    // Standard normal expert: T = 1, mu * T = 0.
    precision_sum = precision_sum + 1.0;
    weighted_mean = weighted_mean + 0.0;
  }
  return DiagGaussian(weighted_mean / precision_sum, -log(precision_sum));
}

DiagGaussian quotient_of_experts(const DiagGaussian& numerator, const DiagGaussian& denominator) {
  require_same_shape(numerator, denominator, "quotient_of_experts");
  const Tensor t_num = numerator.precision();
  const Tensor t_den = denominator.precision();
  const Eigen::VectorXd gap = t_num.values() - t_den.values();
  std::vector<Index> violating;
  for (Index i = 0; i < gap.size(); ++i) {
    if (!(gap[i] > 0.0)) violating.push_back(i);
  }
  if (!violating.empty()) {
    std::ostringstream os;
    os << "quotient_of_experts: numerator precision does not exceed denominator at "
       << violating.size() << " coordinate(s):";
    for (std::size_t i = 0; i < violating.size() && i < 16; ++i) os << ' ' << violating[i];
    if (violating.size() > 16) os << " ...";
    throw ConstraintError(os.str());
  }
  const Tensor t = t_num - t_den;
  return DiagGaussian((numerator.mean() * t_num - denominator.mean() * t_den) / t, -log(t));
}

Tensor constrain_variance_for_quotient(const Tensor& raw_log_var, int modality_count) {
  if (modality_count < 2) {
    throw DomainError("constrain_variance_for_quotient needs at least 2 modalities, got " +
                      std::to_string(modality_count));
  }
  const double n = modality_count;
  // log sigmoid(x) = -softplus(-x)
  const Tensor log_sig = clamp(-softplus(-raw_log_var), -std::numeric_limits<double>::max(),
                               std::log(kSigmoidCeiling));
  return log_sig + std::log(n / (n - 1.0));
}

LatentSample rsample(const DiagGaussian& g, const Tensor& noise) {
  if (noise.shape() != g.shape()) {
    throw DimensionError("rsample: noise " + to_string(noise.shape()) + " vs Gaussian " + to_string(g.shape()));
  }
  Tensor z = g.mean() + exp(g.log_var() * 0.5) * noise;
  return LatentSample{std::move(z), noise, g};
}

LatentSample rsample(const DiagGaussian& g, RngStream& stream) {
  return rsample(g, standard_normal(stream, g.shape()));
}

Tensor kl_to_standard_normal(const DiagGaussian& g) {
  const Tensor& lv = g.log_var();
  return sum(square(g.mean()) + exp(lv) - lv - 1.0, -1) * 0.5;
}

Tensor log_pdf(const DiagGaussian& g, const Tensor& z) {
  if (z.shape().back() != g.dim()) {
    throw DimensionError("log_pdf: z " + to_string(z.shape()) + " vs Gaussian " + to_string(g.shape()));
  }
  static const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Tensor diff = z - g.mean();
  const Tensor terms = -(g.log_var() * 0.5) - square(diff) * 0.5 / exp(g.log_var()) - half_log_2pi;
  return sum(terms, -1);
}

}  // namespace mvae
