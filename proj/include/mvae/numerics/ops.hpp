#ifndef MVAE_NUMERICS_OPS_HPP
#define MVAE_NUMERICS_OPS_HPP

#include "mvae/numerics/tape.hpp"
#include "mvae/numerics/tensor.hpp"

#include <optional>

namespace mvae {

enum class BinaryOp { add, sub, mul, div };
enum class UnaryOp { neg, exp, log, sigmoid, relu, tanh, square, softplus };
enum class ReduceOp { sum, mean };

// Every operation below checks its output for NaN/Inf and throws NumericError
// naming the operation; gradients are recorded on the active tape.

Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise with trailing-dimension broadcasting (a size-1 axis stretches).
// Gradients are summed back over broadcast axes.
Tensor apply_binary(BinaryOp kind, const Tensor& a, const Tensor& b);

Tensor apply_unary(UnaryOp kind, const Tensor& a);

// Reduction over one axis (negative axes count from the back) or all elements.
Tensor reduce(ReduceOp kind, const Tensor& a, std::optional<Index> axis = std::nullopt,
              bool keepdim = false);

// max + log(sum(exp(x - max))) along `axis`.
Tensor log_sum_exp(const Tensor& a, Index axis, bool keepdim = false);

Tensor log_softmax(const Tensor& a, Index axis);

// Gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor slice_columns(const Tensor& a, Index begin, Index count);
Tensor reshape(const Tensor& a, Shape shape);

// Materialized broadcast of `a` to `shape` (differentiable).
Tensor broadcast_to(const Tensor& a, const Shape& shape);

// Shape that results from broadcasting a against b; throws DimensionError.
Shape broadcast_shape(const Shape& a, const Shape& b);

inline Tensor add(const Tensor& a, const Tensor& b) { return apply_binary(BinaryOp::add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return apply_binary(BinaryOp::sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return apply_binary(BinaryOp::mul, a, b); }
inline Tensor div(const Tensor& a, const Tensor& b) { return apply_binary(BinaryOp::div, a, b); }

inline Tensor neg(const Tensor& a) { return apply_unary(UnaryOp::neg, a); }
inline Tensor exp(const Tensor& a) { return apply_unary(UnaryOp::exp, a); }
inline Tensor log(const Tensor& a) { return apply_unary(UnaryOp::log, a); }
inline Tensor sigmoid(const Tensor& a) { return apply_unary(UnaryOp::sigmoid, a); }
inline Tensor relu(const Tensor& a) { return apply_unary(UnaryOp::relu, a); }
inline Tensor tanh(const Tensor& a) { return apply_unary(UnaryOp::tanh, a); }
inline Tensor square(const Tensor& a) { return apply_unary(UnaryOp::square, a); }
inline Tensor softplus(const Tensor& a) { return apply_unary(UnaryOp::softplus, a); }

inline Tensor sum(const Tensor& a, std::optional<Index> axis = std::nullopt, bool keepdim = false) {
  return reduce(ReduceOp::sum, a, axis, keepdim);
}
inline Tensor mean(const Tensor& a, std::optional<Index> axis = std::nullopt, bool keepdim = false) {
  return reduce(ReduceOp::mean, a, axis, keepdim);
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, Tensor::scalar(s)); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
inline Tensor operator*(double s, const Tensor& a) { return mul(Tensor::scalar(s), a); }
inline Tensor operator/(const Tensor& a, double s) { return div(a, Tensor::scalar(s)); }

}  // namespace mvae

#endif  // MVAE_NUMERICS_OPS_HPP
