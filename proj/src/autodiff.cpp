#include "cavit/autodiff.hpp"

#include <cmath>

namespace cavit {

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTransposeLast2: return "transpose_last2";
    case OpKind::kSoftmax: return "softmax_lastdim";
    case OpKind::kLayerNorm: return "layernorm";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kGelu: return "gelu";
    case OpKind::kSum: return "sum_all";
    case OpKind::kMean: return "mean_all";
    case OpKind::kConcat1: return "concat_axis1";
    case OpKind::kSlice1: return "slice_axis1";
    case OpKind::kReshape: return "reshape";
    case OpKind::kBroadcastBatch: return "broadcast_batch";
    case OpKind::kSplitHeads: return "split_heads";
    case OpKind::kMergeHeads: return "merge_heads";
    case OpKind::kPatches: return "extract_patches";
    case OpKind::kCrossEntropy: return "cross_entropy";
  }
  return "unknown";
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  if (value.empty()) throw ContractError("cannot record an empty tensor");
  TapeNode<T> n;
  n.op = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(OpKind op, std::vector<std::size_t> inputs, Tensor<T> value,
                       typename TapeNode<T>::Rule rule) {
  if (backward_done_) throw StateError("cannot record onto a tape after backward");
  TapeNode<T> n;
  n.op = op;
  n.value = std::move(value);
  for (auto id : inputs)
    if (nodes_[id].requires_grad) n.requires_grad = true;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.rule = std::move(rule);
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T>& Tape<T>::grad_slot(std::size_t id) {
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  auto& g = grads_[id];
  if (g.empty()) g = Tensor<T>::zeros(nodes_[id].value.dims());
  return g;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var<T> v) const {
  if (!backward_done_) throw StateError("gradients are only available after backward");
  if (v.id() >= grads_.size() || grads_[v.id()].empty())
    throw StateError("node " + std::to_string(v.id()) + " does not carry a gradient");
  return grads_[v.id()];
}

template <typename T>
void Tape<T>::accumulate(std::size_t id, const Tensor<T>& g) {
  if (!nodes_[id].requires_grad) return;
  auto& slot = grad_slot(id);
  if (slot.dims() != g.dims())
    throw DimensionError("gradient " + shape_str(g.dims()) + " does not match value " +
                         shape_str(slot.dims()) + " for " +
                         std::string(op_name(nodes_[id].op)));
  auto dst = slot.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void Tape<T>::accumulate_range(std::size_t id, std::size_t offset, std::span<const T> g) {
  if (!nodes_[id].requires_grad) return;
  auto dst = grad_slot(id).data();
  if (offset + g.size() > dst.size()) throw IndexError("gradient range out of bounds");
  for (std::size_t i = 0; i < g.size(); ++i) dst[offset + i] += g[i];
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.valid() && &loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (nodes_.empty()) throw ContractError("backward on an empty tape");
  if (backward_done_)
    throw StateError("backward already ran on this tape; call reset_grads() first");
  const auto& lv = nodes_[loss.id()].value;
  if (lv.numel() != 1)
    throw ContractError("backward needs a scalar loss, got shape " + shape_str(lv.dims()));

  grads_.assign(nodes_.size(), Tensor<T>());
  grad_slot(loss.id()).data()[0] = T(1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.rule || grads_[i].empty()) continue;
    n.rule(grads_[i], *this);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].requires_grad) grad_slot(i);
  backward_done_ = true;
}

template <typename T>
void Tape<T>::reset_grads() {
  grads_.clear();
  backward_done_ = false;
}

template class Tape<float>;
template class Tape<double>;

namespace {
thread_local FlopCounter* active_counter = nullptr;
}

FlopCounter::FlopCounter() : previous_(active_counter) { active_counter = this; }

FlopCounter::~FlopCounter() { active_counter = previous_; }

void FlopCounter::add_matmul(std::uint64_t macs) {
  if (active_counter) active_counter->flops_ += 2 * macs;
}

}  // namespace cavit
