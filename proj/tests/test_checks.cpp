#include "mvae/checks.hpp"

#include <doctest.h>

#include <cmath>

using namespace mvae;

TEST_CASE("every built-in check passes") {
  const std::vector<CheckResult> results = run_all_checks();
  CHECK(results.size() >= 8);
  for (const CheckResult& r : results) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
    CHECK(!r.name.empty());
    CHECK(!r.detail.empty());
  }
}

TEST_CASE("the grid check catches a wrong fusion") {
  const FusionFunction exact = [](std::span<const DiagGaussian> experts, bool include_prior) {
    return product_of_experts(experts, include_prior);
  };
  CHECK(check_poe_grid(exact, 20, 3).passed);

  // Averaging means instead of precision weighting.
  const FusionFunction unweighted = [](std::span<const DiagGaussian> experts, bool include_prior) {
    const DiagGaussian right = product_of_experts(experts, include_prior);
    Tensor m = Tensor::zeros(right.mean().shape());
    for (const DiagGaussian& e : experts) m = m + e.mean();
    return DiagGaussian(m / static_cast<double>(experts.size() + (include_prior ? 1 : 0)), right.log_var());
  };
  CHECK_FALSE(check_poe_grid(unweighted, 20, 3).passed);

  // Forgetting the prior expert.
  const FusionFunction no_prior = [](std::span<const DiagGaussian> experts, bool) {
    return product_of_experts(experts, false);
  };
  CHECK_FALSE(check_poe_grid(no_prior, 20, 3).passed);

  // Variance off by one percent.
  const FusionFunction loose = [](std::span<const DiagGaussian> experts, bool include_prior) {
    const DiagGaussian right = product_of_experts(experts, include_prior);
    return DiagGaussian(right.mean(), right.log_var() + std::log(1.01));
  };
  CHECK_FALSE(check_poe_grid(loose, 20, 3).passed);
}

TEST_CASE("linear-Gaussian estimator checks report three estimators and the zero-variance case") {
  const std::vector<CheckResult> r = check_linear_gaussian_estimators(2000, 5);
  CHECK(r.size() >= 4);
  for (const CheckResult& c : r) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
  }
}
