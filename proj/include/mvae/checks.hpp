#ifndef MVAE_CHECKS_HPP
#define MVAE_CHECKS_HPP

#include "mvae/gaussian.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mvae {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

using FusionFunction = std::function<DiagGaussian(std::span<const DiagGaussian>, bool include_prior)>;

// Random 1-D expert sets (sizes 1-5, with and without the prior) fused by
// `fuse`, compared against the normalized product density on a fine grid.
// Passes when every L1 distance is below 1e-3.
CheckResult check_poe_grid(const FusionFunction& fuse, Index n_sets = 100, std::uint64_t seed = 11);
CheckResult check_poe_grid(Index n_sets = 100, std::uint64_t seed = 11);

// quotient(product(p, q), q) == p within 1e-10, and quotient throws exactly
// when some numerator precision fails to exceed the denominator's.
CheckResult check_qoe_inversion(Index n_pairs = 1000, std::uint64_t seed = 12);

// Variances from constrain_variance_for_quotient keep sum_i T_i > N - 1.
CheckResult check_quotient_constraint(Index n_draws = 100000, std::uint64_t seed = 13);

// Central differences (h = 1e-5) on every differentiable op and on the full
// two-modality ELBO with frozen noise; max relative error below 1e-4.
std::vector<CheckResult> check_gradients(std::uint64_t seed = 14);

// Closed-form KL(q || N(0, I)) within 3 standard errors of a Monte-Carlo mean.
CheckResult check_kl_monte_carlo(Index n_gaussians = 20, Index n_draws = 100000, std::uint64_t seed = 15);

// Importance-sampling estimators against the exact linear-Gaussian answers,
// and zero log-weight variance under the exact posterior.
std::vector<CheckResult> check_linear_gaussian_estimators(Index n_samples = 10000, std::uint64_t seed = 16);

// Reference MNIST configuration: image encoder 730,240, inference total 1,063,680.
CheckResult check_parameter_counts();

std::vector<CheckResult> run_all_checks();

}  // namespace mvae

#endif  // MVAE_CHECKS_HPP
