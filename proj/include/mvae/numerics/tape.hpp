#ifndef MVAE_NUMERICS_TAPE_HPP
#define MVAE_NUMERICS_TAPE_HPP

#include "mvae/numerics/tensor.hpp"

#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace mvae {

// Handed to a node's backward rule; routes input gradients to the tape.
class GradAccumulator {
 public:
  GradAccumulator(std::span<const std::optional<std::size_t>> inputs,
                  std::vector<Eigen::VectorXd>& grads)
      : inputs_(inputs), grads_(grads) {}

  // True when input `slot` is tracked and needs a gradient.
  bool needs(std::size_t slot) const { return slot < inputs_.size() && inputs_[slot].has_value(); }

  template <typename Derived>
  void add(std::size_t slot, const Eigen::DenseBase<Derived>& g) {
    if (!needs(slot)) return;
    Eigen::VectorXd& target = grads_[*inputs_[slot]];
    if (target.size() == 0) {
      target = g.derived();
    } else {
      target += g.derived();
    }
  }

 private:
  std::span<const std::optional<std::size_t>> inputs_;
  std::vector<Eigen::VectorXd>& grads_;
};

using BackwardFn = std::function<void(const Eigen::VectorXd& grad_out, GradAccumulator& acc)>;

// Gradients of a loss keyed by the watched leaf tensors.
class GradientMap {
 public:
  GradientMap() = default;
  GradientMap(std::uint64_t tape, std::unordered_map<std::size_t, Tensor> grads)
      : tape_(tape), grads_(std::move(grads)) {}

  const Tensor& operator[](const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const;
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  std::uint64_t tape_ = 0;
  std::unordered_map<std::size_t, Tensor> grads_;
};

// Append-only record of differentiable operations. Single owner, single
// backward pass. Operations record onto the tape activated by TapeScope on
// the calling thread.
class GradTape {
 public:
  GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  std::uint64_t id() const noexcept { return id_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

  // Registers `value` as a leaf; gradients are reported against the result.
  Tensor watch(const Tensor& value);

  // Reverse sweep from a scalar loss. Every leaf receives a gradient
  // (zeros when the loss does not depend on it). Consumes the tape.
  GradientMap backward(const Tensor& loss);

  // Used by operations: attaches `out` to the tape when any input is tracked here.
  Tensor record(Tensor out, std::span<const Tensor* const> inputs, BackwardFn backward);

 private:
  struct Node {
    std::vector<std::optional<std::size_t>> inputs;
    Shape shape;
    BackwardFn backward;
    bool leaf = false;
  };

  std::uint64_t id_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Makes a tape the active recording target for this thread.
class TapeScope {
 public:
  explicit TapeScope(GradTape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradTape* previous_;
};

GradTape* active_tape() noexcept;

// Records on the active tape if there is one, otherwise returns `out` untouched.
Tensor record(Tensor out, std::initializer_list<const Tensor*> inputs, BackwardFn backward);

}  // namespace mvae

#endif  // MVAE_NUMERICS_TAPE_HPP
