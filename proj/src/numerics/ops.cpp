#include "mvae/numerics/ops.hpp"

#include "mvae/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace mvae {
namespace {

using Eigen::VectorXd;

Tensor finish(Tensor out, const char* op) {
  const VectorXd& v = out.values();
  if (!v.allFinite()) {
    Index bad = 0;
    while (bad < v.size() && std::isfinite(v[bad])) ++bad;
    throw NumericError(std::string(op) + " produced a non-finite value at index " + std::to_string(bad));
  }
  return out;
}

Index normalize_axis(Index axis, Index rank) {
  const Index a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw DimensionError("axis " + std::to_string(axis) + " invalid for rank " + std::to_string(rank));
  }
  return a;
}

// Flat index of each output element within an operand of shape `in`.
// Empty when `in` already equals `out`.
std::vector<Index> broadcast_index(const Shape& in, const Shape& out) {
  if (in == out) return {};
  const std::size_t rank = out.size();
  const std::size_t offset = rank - in.size();
  std::vector<Index> stride(rank, 0);
  Index s = 1;
  for (std::size_t d = in.size(); d-- > 0;) {
    stride[d + offset] = in[d] == 1 ? 0 : s;
    s *= in[d];
  }
  const Index total = element_count(out);
  std::vector<Index> idx(static_cast<std::size_t>(total));
  std::vector<Index> counter(rank, 0);
  Index flat = 0;
  for (Index k = 0; k < total; ++k) {
    idx[static_cast<std::size_t>(k)] = flat;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      flat += stride[d];
      if (counter[d] < out[d]) break;
      flat -= stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return idx;
}

VectorXd gather(const VectorXd& v, const std::vector<Index>& idx) {
  if (idx.empty()) return v;
  VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Index>(k)] = v[idx[k]];
  return out;
}

VectorXd scatter_add(const VectorXd& g, const std::vector<Index>& idx, Index size) {
  if (idx.empty()) return g;
  VectorXd out = VectorXd::Zero(size);
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] += g[static_cast<Index>(k)];
  return out;
}

const char* binary_name(BinaryOp kind) {
  switch (kind) {
    case BinaryOp::add: return "add";
    case BinaryOp::sub: return "sub";
    case BinaryOp::mul: return "mul";
    case BinaryOp::div: return "div";
  }
  return "binary";
}

const char* unary_name(UnaryOp kind) {
  switch (kind) {
    case UnaryOp::neg: return "neg";
    case UnaryOp::exp: return "exp";
    case UnaryOp::log: return "log";
    case UnaryOp::sigmoid: return "sigmoid";
    case UnaryOp::relu: return "relu";
    case UnaryOp::tanh: return "tanh";
    case UnaryOp::square: return "square";
    case UnaryOp::softplus: return "softplus";
  }
  return "unary";
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

struct AxisLayout {
  Index outer, n, inner;
  Shape out_shape;
};

AxisLayout axis_layout(const Shape& shape, Index axis, bool keepdim) {
  AxisLayout l{1, shape[static_cast<std::size_t>(axis)], 1, {}};
  for (Index d = 0; d < axis; ++d) l.outer *= shape[static_cast<std::size_t>(d)];
  for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < shape.size(); ++d) l.inner *= shape[d];
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (static_cast<Index>(d) == axis) {
      if (keepdim) l.out_shape.push_back(1);
    } else {
      l.out_shape.push_back(shape[d]);
    }
  }
  return l;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const Index ea = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const Index eb = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (ea == eb || eb == 1) {
      out[i] = ea;
    } else if (ea == 1) {
      out[i] = eb;
    } else {
      throw DimensionError("cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul shape mismatch: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const Index m = a.shape()[0], n = b.shape()[1];
  VectorXd out(m * n);
  Eigen::Map<RowMatrix>(out.data(), m, n).noalias() = a.matrix() * b.matrix();
  Tensor result = finish(Tensor({m, n}, std::move(out)), "matmul");
  return record(std::move(result), {&a, &b}, [a, b, m, n](const VectorXd& g, GradAccumulator& acc) {
    Eigen::Map<const RowMatrix> G(g.data(), m, n);
    if (acc.needs(0)) {
      VectorXd ga(a.size());
      Eigen::Map<RowMatrix>(ga.data(), a.rows(), a.cols()).noalias() = G * b.matrix().transpose();
      acc.add(0, ga);
    }
    if (acc.needs(1)) {
      VectorXd gb(b.size());
      Eigen::Map<RowMatrix>(gb.data(), b.rows(), b.cols()).noalias() = a.matrix().transpose() * G;
      acc.add(1, gb);
    }
  });
}

Tensor apply_binary(BinaryOp kind, const Tensor& a, const Tensor& b) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape());
  auto ia = std::make_shared<const std::vector<Index>>(broadcast_index(a.shape(), out_shape));
  auto ib = std::make_shared<const std::vector<Index>>(broadcast_index(b.shape(), out_shape));

  VectorXd out;
  {
    // Operands already at the output shape are used in place.
    const VectorXd av_storage = ia->empty() ? VectorXd() : gather(a.values(), *ia);
    const VectorXd bv_storage = ib->empty() ? VectorXd() : gather(b.values(), *ib);
    const VectorXd& av = ia->empty() ? a.values() : av_storage;
    const VectorXd& bv = ib->empty() ? b.values() : bv_storage;
    switch (kind) {
      case BinaryOp::add: out = av + bv; break;
      case BinaryOp::sub: out = av - bv; break;
      case BinaryOp::mul: out = av.cwiseProduct(bv); break;
      case BinaryOp::div: out = av.cwiseQuotient(bv); break;
    }
  }
  Tensor result = finish(Tensor(std::move(out_shape), std::move(out)), binary_name(kind));

  return record(std::move(result), {&a, &b}, [kind, a, b, ia, ib](const VectorXd& g, GradAccumulator& acc) {
    auto expanded = [](const Tensor& t, const std::vector<Index>& idx) {
      return idx.empty() ? t.values() : gather(t.values(), idx);
    };
    if (acc.needs(0)) {
      switch (kind) {
        case BinaryOp::add:
        case BinaryOp::sub: acc.add(0, scatter_add(g, *ia, a.size())); break;
        case BinaryOp::mul: acc.add(0, scatter_add(g.cwiseProduct(expanded(b, *ib)), *ia, a.size())); break;
        case BinaryOp::div: acc.add(0, scatter_add(g.cwiseQuotient(expanded(b, *ib)), *ia, a.size())); break;
      }
    }
    if (acc.needs(1)) {
      switch (kind) {
        case BinaryOp::add: acc.add(1, scatter_add(g, *ib, b.size())); break;
        case BinaryOp::sub: acc.add(1, scatter_add(-g, *ib, b.size())); break;
        case BinaryOp::mul: acc.add(1, scatter_add(g.cwiseProduct(expanded(a, *ia)), *ib, b.size())); break;
        case BinaryOp::div: {
          const VectorXd bv = expanded(b, *ib);
          const VectorXd gb = -(g.array() * expanded(a, *ia).array() / bv.array().square()).matrix();
          acc.add(1, scatter_add(gb, *ib, b.size()));
          break;
        }
      }
    }
  });
}

Tensor apply_unary(UnaryOp kind, const Tensor& a) {
  const VectorXd& x = a.values();
  VectorXd y(x.size());
  switch (kind) {
    case UnaryOp::neg: y = -x; break;
    case UnaryOp::exp: y = x.array().exp().matrix(); break;
    case UnaryOp::log:
      for (Index i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0)) {
          throw DomainError("log of non-positive entry " + std::to_string(x[i]) + " at index " +
                            std::to_string(i));
        }
      }
      y = x.array().log().matrix();
      break;
    case UnaryOp::sigmoid: y = x.unaryExpr(&stable_sigmoid); break;
    case UnaryOp::relu: y = x.cwiseMax(0.0); break;
    case UnaryOp::tanh: y = x.array().tanh().matrix(); break;
    case UnaryOp::square: y = x.array().square().matrix(); break;
    case UnaryOp::softplus: y = x.unaryExpr(&stable_softplus); break;
  }
  Tensor result = finish(Tensor(a.shape(), std::move(y)), unary_name(kind));
  return record(result, {&a}, [kind, x, y = result.values()](const VectorXd& g, GradAccumulator& acc) {
    switch (kind) {
      case UnaryOp::neg: acc.add(0, -g); break;
      case UnaryOp::exp: acc.add(0, g.cwiseProduct(y)); break;
      case UnaryOp::log: acc.add(0, g.cwiseQuotient(x)); break;
      case UnaryOp::sigmoid: acc.add(0, (g.array() * y.array() * (1.0 - y.array())).matrix()); break;
      case UnaryOp::relu: acc.add(0, (g.array() * (x.array() > 0.0).cast<double>()).matrix()); break;
      case UnaryOp::tanh: acc.add(0, (g.array() * (1.0 - y.array().square())).matrix()); break;
      case UnaryOp::square: acc.add(0, (2.0 * g.array() * x.array()).matrix()); break;
      case UnaryOp::softplus: acc.add(0, g.cwiseProduct(x.unaryExpr(&stable_sigmoid))); break;
    }
  });
}

Tensor reduce(ReduceOp kind, const Tensor& a, std::optional<Index> axis, bool keepdim) {
  const double scale_all = kind == ReduceOp::mean ? 1.0 / static_cast<double>(a.size()) : 1.0;
  if (!axis) {
    if (a.size() == 0) throw DimensionError("reduction over an empty tensor");
    Shape shape = keepdim ? Shape(a.shape().size(), 1) : Shape{};
    Tensor result = finish(Tensor(std::move(shape), VectorXd::Constant(1, a.values().sum() * scale_all)),
                           "reduce");
    return record(std::move(result), {&a}, [n = a.size(), scale_all](const VectorXd& g, GradAccumulator& acc) {
      acc.add(0, VectorXd::Constant(n, g[0] * scale_all));
    });
  }

  const Index ax = normalize_axis(*axis, a.rank());
  AxisLayout l = axis_layout(a.shape(), ax, keepdim);
  if (l.n == 0) throw DimensionError("reduction over an empty axis");
  const double scale = kind == ReduceOp::mean ? 1.0 / static_cast<double>(l.n) : 1.0;
  const VectorXd& x = a.values();
  VectorXd out = VectorXd::Zero(l.outer * l.inner);
  for (Index o = 0; o < l.outer; ++o)
    for (Index j = 0; j < l.n; ++j)
      for (Index i = 0; i < l.inner; ++i) out[o * l.inner + i] += x[(o * l.n + j) * l.inner + i];
  out *= scale;
  Tensor result = finish(Tensor(l.out_shape, std::move(out)), "reduce");
  return record(std::move(result), {&a}, [l, scale, size = a.size()](const VectorXd& g, GradAccumulator& acc) {
    VectorXd gx(size);
    for (Index o = 0; o < l.outer; ++o)
      for (Index j = 0; j < l.n; ++j)
        for (Index i = 0; i < l.inner; ++i) gx[(o * l.n + j) * l.inner + i] = g[o * l.inner + i] * scale;
    acc.add(0, gx);
  });
}

Tensor log_sum_exp(const Tensor& a, Index axis, bool keepdim) {
  const Index ax = normalize_axis(axis, a.rank());
  AxisLayout l = axis_layout(a.shape(), ax, keepdim);
  if (l.n == 0) throw DimensionError("log_sum_exp over an empty axis");
  const VectorXd& x = a.values();
  VectorXd out(l.outer * l.inner);
  for (Index o = 0; o < l.outer; ++o) {
    for (Index i = 0; i < l.inner; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (Index j = 0; j < l.n; ++j) m = std::max(m, x[(o * l.n + j) * l.inner + i]);
      double s = 0.0;
      for (Index j = 0; j < l.n; ++j) s += std::exp(x[(o * l.n + j) * l.inner + i] - m);
      out[o * l.inner + i] = m + std::log(s);
    }
  }
  Tensor result = finish(Tensor(l.out_shape, std::move(out)), "log_sum_exp");
  return record(result, {&a}, [l, x, y = result.values()](const VectorXd& g, GradAccumulator& acc) {
    VectorXd gx(x.size());
    for (Index o = 0; o < l.outer; ++o)
      for (Index j = 0; j < l.n; ++j)
        for (Index i = 0; i < l.inner; ++i) {
          const Index k = (o * l.n + j) * l.inner + i;
          gx[k] = g[o * l.inner + i] * std::exp(x[k] - y[o * l.inner + i]);
        }
    acc.add(0, gx);
  });
}

Tensor log_softmax(const Tensor& a, Index axis) { return a - log_sum_exp(a, axis, true); }

Tensor clamp(const Tensor& a, double lo, double hi) {
  const VectorXd& x = a.values();
  Tensor result = finish(Tensor(a.shape(), x.cwiseMax(lo).cwiseMin(hi)), "clamp");
  return record(std::move(result), {&a}, [x, lo, hi](const VectorXd& g, GradAccumulator& acc) {
    acc.add(0, (g.array() * ((x.array() >= lo) && (x.array() <= hi)).cast<double>()).matrix());
  });
}

Tensor slice_columns(const Tensor& a, Index begin, Index count) {
  if (a.rank() != 2 || begin < 0 || count < 0 || begin + count > a.shape()[1]) {
    throw DimensionError("column slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") invalid for " + to_string(a.shape()));
  }
  const Index rows = a.shape()[0], cols = a.shape()[1];
  VectorXd out(rows * count);
  Eigen::Map<RowMatrix>(out.data(), rows, count) = a.matrix().middleCols(begin, count);
  Tensor result(Shape{rows, count}, std::move(out));
  return record(std::move(result), {&a}, [rows, cols, begin, count](const VectorXd& g, GradAccumulator& acc) {
    VectorXd gx = VectorXd::Zero(rows * cols);
    Eigen::Map<RowMatrix>(gx.data(), rows, cols).middleCols(begin, count) =
        Eigen::Map<const RowMatrix>(g.data(), rows, count);
    acc.add(0, gx);
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  Tensor result(std::move(shape), a.values());
  return record(std::move(result), {&a}, [](const VectorXd& g, GradAccumulator& acc) { acc.add(0, g); });
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
  if (broadcast_shape(a.shape(), shape) != shape) {
    throw DimensionError("cannot broadcast " + to_string(a.shape()) + " to " + to_string(shape));
  }
  std::vector<Index> idx = broadcast_index(a.shape(), shape);
  Tensor result(shape, gather(a.values(), idx));
  return record(std::move(result), {&a}, [idx = std::move(idx), n = a.size()](const VectorXd& g, GradAccumulator& acc) {
    acc.add(0, scatter_add(g, idx, n));
  });
}

}  // namespace mvae
