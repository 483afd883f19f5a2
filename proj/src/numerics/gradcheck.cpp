#include "mvae/numerics/gradcheck.hpp"

#include "mvae/error.hpp"
#include "mvae/numerics/tape.hpp"

#include <algorithm>
#include <cmath>

namespace mvae {

GradCheckReport grad_check_report(const ScalarFunction& f, const Tensor& x, double h) {
  if (!(h > 0.0)) throw DomainError("grad_check step must be positive");

  const double first = f(x.detach()).item();
  const double second = f(x.detach()).item();
  if (first != second) throw DomainError("grad_check: function is not deterministic");

  GradCheckReport report;
  {
    GradTape tape;
    TapeScope scope(tape);
    Tensor leaf = tape.watch(x);
    Tensor y = f(leaf);
    if (!y.tracked()) {
      report.analytic = Eigen::VectorXd::Zero(x.size());
    } else {
      report.analytic = tape.backward(y)[leaf].values();
    }
  }

  report.numeric.resize(x.size());
  Eigen::VectorXd probe = x.values();
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(Tensor(x.shape(), probe)).item();
    probe[i] = saved - h;
    const double down = f(Tensor(x.shape(), probe)).item();
    probe[i] = saved;
    report.numeric[i] = (up - down) / (2.0 * h);

    const double a = report.analytic[i], n = report.numeric[i];
    const double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
    }
  }
  return report;
}

}  // namespace mvae
