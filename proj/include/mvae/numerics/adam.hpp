#ifndef MVAE_NUMERICS_ADAM_HPP
#define MVAE_NUMERICS_ADAM_HPP

#include "mvae/numerics/tensor.hpp"

#include <cstdint>

namespace mvae {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
};

// Bias-corrected Adam update. Moments are zero-initialized on first use.
// Throws DimensionError on shape mismatch and NumericError on a non-finite grad.
Tensor adam_step(const Tensor& param, const Tensor& grad, AdamState& state, const AdamOptions& options = {});

}  // namespace mvae

#endif  // MVAE_NUMERICS_ADAM_HPP
