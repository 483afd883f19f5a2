#ifndef MVAE_NUMERICS_TENSOR_HPP
#define MVAE_NUMERICS_TENSOR_HPP

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace mvae {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string to_string(const Shape& shape);
Index element_count(const Shape& shape);

// Position of a tensor on a gradient tape. tape == 0 means untracked.
struct NodeRef {
  std::uint64_t tape = 0;
  std::size_t index = 0;
};

// Immutable dense f64 array in row-major order. Copies share storage.
// A tensor produced while a GradTape is active and depending on a watched
// tensor carries a NodeRef into that tape.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, Eigen::VectorXd values);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor constant(Shape shape, double value);
  static Tensor from_values(Shape shape, std::initializer_list<double> values);
  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);
  static Tensor from_vector(const Eigen::Ref<const Eigen::VectorXd>& v);

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index size() const noexcept { return values_->size(); }
  Index extent(Index axis) const;
  Index rows() const;
  Index cols() const;

  const Eigen::VectorXd& values() const noexcept { return *values_; }
  // Rank-2 view (rank-1 tensors are viewed as a single row).
  Eigen::Map<const RowMatrix> matrix() const;
  double operator[](Index flat) const { return (*values_)[flat]; }
  double at(Index row, Index col) const;
  double item() const;

  bool tracked() const noexcept { return node_.tape != 0; }
  const NodeRef& node() const noexcept { return node_; }
  Tensor detach() const;

 private:
  friend class GradTape;

  Shape shape_;
  std::shared_ptr<const Eigen::VectorXd> values_;
  NodeRef node_;
};

}  // namespace mvae

#endif  // MVAE_NUMERICS_TENSOR_HPP
