#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string_view>
#include <vector>

#include "cavit/tensor.hpp"

namespace cavit {

enum class OpKind {
  kLeaf,
  kMatmul,
  kTransposeLast2,
  kSoftmax,
  kLayerNorm,
  kAdd,
  kMul,
  kScale,
  kGelu,
  kSum,
  kMean,
  kConcat1,
  kSlice1,
  kReshape,
  kBroadcastBatch,
  kSplitHeads,
  kMergeHeads,
  kPatches,
  kCrossEntropy,
};

std::string_view op_name(OpKind op);

template <typename T>
class Tape;

/// Handle to a value recorded on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& dims() const { return value().dims(); }
  std::size_t dim(int axis) const { return value().dim(axis); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
struct TapeNode {
  using Rule = std::function<void(const Tensor<T>& grad_out, Tape<T>& tape)>;

  OpKind op = OpKind::kLeaf;
  std::vector<std::size_t> inputs;
  Tensor<T> value;
  bool requires_grad = false;
  /// Pushes grad_out through to `inputs`. Values it needs are either
  /// captured at record time or read back from the tape by id.
  Rule rule;
};

/// Append-only record of one forward evaluation.
///
/// A tape is single-writer. `backward` walks the nodes in strict reverse
/// order of recording and may run once; call `reset_grads` before running
/// it again on the same tape.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(Tensor<T> value, bool requires_grad = false);

  /// Records an op output. The rule is dropped when no input needs a gradient.
  Var<T> record(OpKind op, std::vector<std::size_t> inputs, Tensor<T> value,
                typename TapeNode<T>::Rule rule);

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor<T>& value(Var<T> v) const { return nodes_[v.id()].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient of the last backward pass; zeros when the node was unreachable.
  const Tensor<T>& grad(Var<T> v) const;

  void accumulate(std::size_t id, const Tensor<T>& g);
  /// Accumulates `g` into the flat storage of node `id` starting at `offset`.
  void accumulate_range(std::size_t id, std::size_t offset, std::span<const T> g);

  void backward(Var<T> loss);
  void reset_grads();
  bool backward_done() const noexcept { return backward_done_; }

  std::size_t size() const noexcept { return nodes_.size(); }
  const TapeNode<T>& node(std::size_t id) const { return nodes_[id]; }

 private:
  Tensor<T>& grad_slot(std::size_t id);

  std::deque<TapeNode<T>> nodes_;  // stable addresses: value() references survive later pushes
  std::vector<Tensor<T>> grads_;
  bool backward_done_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

/// Counts 2 x multiply-accumulates of every forward matmul executed on this
/// thread while the counter is alive. Counters nest; only the innermost counts.
class FlopCounter {
 public:
  FlopCounter();
  ~FlopCounter();
  FlopCounter(const FlopCounter&) = delete;
  FlopCounter& operator=(const FlopCounter&) = delete;

  std::uint64_t matmul_flops() const noexcept { return flops_; }

  static void add_matmul(std::uint64_t macs);

 private:
  std::uint64_t flops_ = 0;
  FlopCounter* previous_ = nullptr;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace cavit
