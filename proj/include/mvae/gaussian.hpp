#ifndef MVAE_GAUSSIAN_HPP
#define MVAE_GAUSSIAN_HPP

#include "mvae/numerics/ops.hpp"
#include "mvae/numerics/rng.hpp"

#include <span>
#include <vector>

namespace mvae {

inline constexpr double kMinLogVar = -20.0;
inline constexpr double kMaxLogVar = 10.0;

// Diagonal Gaussian (or a batch of them, one per row) stored as mean and
// log-variance. log_var is clamped to [kMinLogVar, kMaxLogVar] on
// construction, which keeps the precision exp(-log_var) finite and positive.
class DiagGaussian {
 public:
  DiagGaussian(Tensor mean, Tensor log_var);

  // N(0, I) with the given shape ([D] or [B x D]).
  static DiagGaussian standard(const Shape& shape);

  const Tensor& mean() const noexcept { return mean_; }
  const Tensor& log_var() const noexcept { return log_var_; }
  const Shape& shape() const noexcept { return mean_.shape(); }
  Index dim() const { return mean_.shape().back(); }

  Tensor variance() const { return exp(log_var_); }
  Tensor precision() const { return exp(-log_var_); }

 private:
  Tensor mean_;
  Tensor log_var_;
};

struct LatentSample {
  Tensor z;
  Tensor noise;
  DiagGaussian source;
};

// Precision-weighted fusion: T = sum T_i (+1 for the prior expert),
// mean = sum(mu_i T_i) / T. The prior contributes exactly what a standard
// normal expert appended last would. With no experts the prior alone is
// returned, shaped by `prior_shape`.
DiagGaussian product_of_experts(std::span<const DiagGaussian> experts, bool include_prior,
                                const Shape& prior_shape = {});

// T = T_num - T_den, mean = (T_num mu_num - T_den mu_den) / T. Throws
// ConstraintError listing every coordinate where T_num <= T_den.
DiagGaussian quotient_of_experts(const DiagGaussian& numerator, const DiagGaussian& denominator);

// log of (N / (N-1)) * sigmoid(raw): a variance strictly inside (0, N/(N-1)),
// which keeps every quotient in the MVAE-Q factorization well defined.
Tensor constrain_variance_for_quotient(const Tensor& raw_log_var, int modality_count);

// z = mean + exp(0.5 log_var) * noise.
LatentSample rsample(const DiagGaussian& g, const Tensor& noise);
LatentSample rsample(const DiagGaussian& g, RngStream& stream);

// 0.5 * sum_d (mu^2 + V - log V - 1), reduced over the last axis.
Tensor kl_to_standard_normal(const DiagGaussian& g);

// Log density summed over the last axis. z may carry extra leading rows that
// broadcast against a single Gaussian.
Tensor log_pdf(const DiagGaussian& g, const Tensor& z);

}  // namespace mvae

#endif  // MVAE_GAUSSIAN_HPP
