#include "mvae/numerics/tape.hpp"

#include "mvae/error.hpp"

#include <atomic>

namespace mvae {
namespace {

std::atomic<std::uint64_t> next_tape_id{1};
thread_local GradTape* current_tape = nullptr;

}  // namespace

const Tensor& GradientMap::operator[](const Tensor& leaf) const {
  if (leaf.node().tape != tape_) throw TapeError("tensor is not a leaf of this tape");
  auto it = grads_.find(leaf.node().index);
  if (it == grads_.end()) throw TapeError("tensor is not a watched leaf");
  return it->second;
}

bool GradientMap::contains(const Tensor& leaf) const {
  return leaf.node().tape == tape_ && grads_.count(leaf.node().index) > 0;
}

GradTape::GradTape() : id_(next_tape_id.fetch_add(1)) {}

Tensor GradTape::watch(const Tensor& value) {
  if (consumed_) throw TapeError("watch on a consumed tape");
  Tensor leaf = value.detach();
  leaf.node_ = {id_, nodes_.size()};
  nodes_.push_back(Node{{}, value.shape(), nullptr, true});
  return leaf;
}

Tensor GradTape::record(Tensor out, std::span<const Tensor* const> inputs, BackwardFn backward) {
  if (consumed_) throw TapeError("recording on a consumed tape");
  std::vector<std::optional<std::size_t>> refs;
  refs.reserve(inputs.size());
  bool any = false;
  for (const Tensor* t : inputs) {
    if (t->node().tape == id_) {
      refs.emplace_back(t->node().index);
      any = true;
    } else {
      refs.emplace_back(std::nullopt);
    }
  }
  if (!any) return out;
  out.node_ = {id_, nodes_.size()};
  nodes_.push_back(Node{std::move(refs), out.shape(), std::move(backward), false});
  return out;
}

GradientMap GradTape::backward(const Tensor& loss) {
  if (consumed_) throw TapeError("backward on a consumed tape");
  if (loss.size() != 1) throw TapeError("backward requires a scalar loss, got " + to_string(loss.shape()));
  if (loss.node().tape != id_) throw TapeError("loss was not recorded on this tape");
  consumed_ = true;

  std::vector<Eigen::VectorXd> grads(nodes_.size());
  grads[loss.node().index] = Eigen::VectorXd::Ones(1);
  for (std::size_t i = loss.node().index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.leaf || grads[i].size() == 0) continue;
    GradAccumulator acc(node.inputs, grads);
    node.backward(grads[i], acc);
    grads[i] = Eigen::VectorXd();
    node.backward = nullptr;
  }

  std::unordered_map<std::size_t, Tensor> leaves;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].leaf) continue;
    const Index n = element_count(nodes_[i].shape);
    Eigen::VectorXd g = grads[i].size() == 0 ? Eigen::VectorXd::Zero(n) : std::move(grads[i]);
    leaves.emplace(i, Tensor(nodes_[i].shape, std::move(g)));
  }
  nodes_.clear();
  return GradientMap(id_, std::move(leaves));
}

TapeScope::TapeScope(GradTape& tape) : previous_(current_tape) { current_tape = &tape; }

TapeScope::~TapeScope() { current_tape = previous_; }

GradTape* active_tape() noexcept { return current_tape; }

Tensor record(Tensor out, std::initializer_list<const Tensor*> inputs, BackwardFn backward) {
  GradTape* tape = current_tape;
  if (tape == nullptr || tape->consumed()) return out;
  return tape->record(std::move(out), std::span<const Tensor* const>(inputs.begin(), inputs.size()),
                      std::move(backward));
}

}  // namespace mvae
