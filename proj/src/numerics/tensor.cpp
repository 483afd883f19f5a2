#include "mvae/numerics/tensor.hpp"

#include "mvae/error.hpp"

#include <sstream>

namespace mvae {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Index element_count(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + to_string(shape));
    n *= e;
  }
  return n;
}

Tensor::Tensor() : values_(std::make_shared<const Eigen::VectorXd>(Eigen::VectorXd::Zero(1))) {}

Tensor::Tensor(Shape shape, Eigen::VectorXd values) : shape_(std::move(shape)) {
  if (element_count(shape_) != values.size()) {
    throw DimensionError("shape " + to_string(shape_) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  values_ = std::make_shared<const Eigen::VectorXd>(std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({}, Eigen::VectorXd::Constant(1, value)); }

Tensor Tensor::zeros(Shape shape) { return constant(std::move(shape), 0.0); }

Tensor Tensor::constant(Shape shape, double value) {
  const Index n = element_count(shape);
  return Tensor(std::move(shape), Eigen::VectorXd::Constant(n, value));
}

Tensor Tensor::from_values(Shape shape, std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v[i++] = x;
  return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  Eigen::VectorXd v(m.size());
  Eigen::Map<RowMatrix>(v.data(), m.rows(), m.cols()) = m;
  return Tensor({m.rows(), m.cols()}, std::move(v));
}

Tensor Tensor::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return Tensor({v.size()}, Eigen::VectorXd(v));
}

Index Tensor::extent(Index axis) const {
  if (axis < 0 || axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " invalid for shape " + to_string(shape_));
  }
  return shape_[static_cast<std::size_t>(axis)];
}

Index Tensor::rows() const {
  if (rank() == 2) return shape_[0];
  if (rank() == 1) return 1;
  throw DimensionError("rows() requires rank 1 or 2, got " + to_string(shape_));
}

Index Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  throw DimensionError("cols() requires rank 1 or 2, got " + to_string(shape_));
}

Eigen::Map<const RowMatrix> Tensor::matrix() const {
  return Eigen::Map<const RowMatrix>(values_->data(), rows(), cols());
}

double Tensor::at(Index row, Index col) const {
  if (row < 0 || row >= rows() || col < 0 || col >= cols()) {
    throw DimensionError("index (" + std::to_string(row) + ", " + std::to_string(col) +
                         ") out of range for " + to_string(shape_));
  }
  return (*values_)[row * cols() + col];
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + to_string(shape_));
  return (*values_)[0];
}

Tensor Tensor::detach() const {
  Tensor t = *this;
  t.node_ = {};
  return t;
}

}  // namespace mvae
