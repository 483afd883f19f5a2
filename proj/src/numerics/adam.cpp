#include "mvae/numerics/adam.hpp"

#include "mvae/error.hpp"

#include <cmath>

namespace mvae {

Tensor adam_step(const Tensor& param, const Tensor& grad, AdamState& state, const AdamOptions& options) {
  if (param.shape() != grad.shape()) {
    throw DimensionError("adam_step: param " + to_string(param.shape()) + " vs grad " + to_string(grad.shape()));
  }
  if (!grad.values().allFinite()) throw NumericError("adam_step: non-finite gradient");
  const Index n = param.size();
  if (state.first_moment.size() == 0 && state.second_moment.size() == 0 && state.step == 0) {
    state.first_moment = Eigen::VectorXd::Zero(n);
    state.second_moment = Eigen::VectorXd::Zero(n);
  }
  if (state.first_moment.size() != n || state.second_moment.size() != n) {
    throw DimensionError("adam_step: moment size does not match parameter " + to_string(param.shape()));
  }

  const Eigen::VectorXd& g = grad.values();
  state.step += 1;
  state.first_moment = options.beta1 * state.first_moment + (1.0 - options.beta1) * g;
  state.second_moment = options.beta2 * state.second_moment + (1.0 - options.beta2) * g.cwiseAbs2();
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);

  Eigen::VectorXd update = options.learning_rate * (state.first_moment.array() / c1) /
                           ((state.second_moment.array() / c2).sqrt() + options.epsilon);
  return Tensor(param.shape(), param.values() - update);
}

}  // namespace mvae
