#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cavit/autodiff.hpp"

namespace cavit {

template <typename T>
class ParamStore;

/// Parameters of one store recorded as gradient-carrying leaves on a tape.
template <typename T>
class BoundParams {
 public:
  Var<T> operator[](std::string_view name) const;
  Var<T> at(std::size_t i) const { return vars_[i]; }
  /// Invalid Var when the store has no such parameter.
  Var<T> optional(std::string_view name) const;
  std::size_t size() const noexcept { return vars_.size(); }

 private:
  friend class ParamStore<T>;
  const ParamStore<T>* store_ = nullptr;
  std::vector<Var<T>> vars_;
};

/// Named, ordered trainable tensors with matching gradient slots.
///
/// Iteration order is insertion order: embedding, positional, blocks by
/// index, then the classifier head.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
  };

  void add(std::string name, Tensor<T> init);

  bool contains(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  Tensor<T>& value(std::string_view name) { return entries_[index_of(name)].value; }
  const Tensor<T>& value(std::string_view name) const { return entries_[index_of(name)].value; }
  const Tensor<T>& grad(std::string_view name) const { return entries_[index_of(name)].grad; }

  std::span<Entry> entries() noexcept { return entries_; }
  std::span<const Entry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const noexcept;

  void zero_grads();

  BoundParams<T> bind(Tape<T>& tape) const;
  /// Copies the gradients of a finished backward pass into the grad slots.
  void collect_grads(const Tape<T>& tape, const BoundParams<T>& bound);

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

extern template class BoundParams<float>;
extern template class BoundParams<double>;
extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace cavit
