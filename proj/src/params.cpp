#include "cavit/params.hpp"

namespace cavit {

template <typename T>
Var<T> BoundParams<T>::operator[](std::string_view name) const {
  return vars_[store_->index_of(name)];
}

template <typename T>
Var<T> BoundParams<T>::optional(std::string_view name) const {
  return store_->contains(name) ? vars_[store_->index_of(name)] : Var<T>();
}

template <typename T>
void ParamStore<T>::add(std::string name, Tensor<T> init) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  Tensor<T> grad = Tensor<T>::zeros(init.dims());
  entries_.push_back({std::move(name), std::move(init), std::move(grad)});
}

template <typename T>
bool ParamStore<T>::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

template <typename T>
std::size_t ParamStore<T>::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw IndexError("no parameter named '" + std::string(name) + "'");
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

template <typename T>
void ParamStore<T>::zero_grads() {
  for (auto& e : entries_) std::fill(e.grad.data().begin(), e.grad.data().end(), T(0));
}

template <typename T>
BoundParams<T> ParamStore<T>::bind(Tape<T>& tape) const {
  BoundParams<T> b;
  b.store_ = this;
  b.vars_.reserve(entries_.size());
  for (const auto& e : entries_) b.vars_.push_back(tape.leaf(e.value, true));
  return b;
}

template <typename T>
void ParamStore<T>::collect_grads(const Tape<T>& tape, const BoundParams<T>& bound) {
  if (bound.store_ != this) throw ContractError("bound parameters belong to another store");
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].grad = tape.grad(bound.vars_[i]);
}

template class BoundParams<float>;
template class BoundParams<double>;
template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace cavit
