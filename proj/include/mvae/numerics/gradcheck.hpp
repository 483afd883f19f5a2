#ifndef MVAE_NUMERICS_GRADCHECK_HPP
#define MVAE_NUMERICS_GRADCHECK_HPP

#include "mvae/numerics/tensor.hpp"

#include <functional>

namespace mvae {

using ScalarFunction = std::function<Tensor(const Tensor&)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  Index worst_index = 0;
  Eigen::VectorXd analytic;
  Eigen::VectorXd numeric;
};

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h against the tape
// gradient at x. Relative error uses max(|analytic|, |numeric|, 1e-8) as the
// denominator. Throws DomainError when f is not deterministic.
GradCheckReport grad_check_report(const ScalarFunction& f, const Tensor& x, double h);

inline double grad_check(const ScalarFunction& f, const Tensor& x, double h) {
  return grad_check_report(f, x, h).max_relative_error;
}

}  // namespace mvae

#endif  // MVAE_NUMERICS_GRADCHECK_HPP
