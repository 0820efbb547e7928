#include "cavit/tensor.hpp"

#include <numeric>

namespace cavit {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_shape(const Shape& dims) {
  if (dims.empty() || dims.size() > kMaxRank)
    throw RankError("tensor rank must be 1.." + std::to_string(kMaxRank) + ", got " +
                    shape_str(dims));
  for (auto d : dims)
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(dims));
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape dims) : dims_(std::move(dims)) {
  check_shape(dims_);
  data_.assign(shape_numel(dims_), T(0));
}

template <typename T>
Tensor<T>::Tensor(Shape dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
  check_shape(dims_);
  if (data_.size() != shape_numel(dims_))
    throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(dims_));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape dims, T value) {
  Tensor t(std::move(dims));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

template <typename T>
std::size_t Tensor<T>::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r)
    throw IndexError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(dims_));
  return dims_[static_cast<std::size_t>(a)];
}

template <typename T>
std::size_t Tensor<T>::offset_of(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank())
    throw RankError("index of rank " + std::to_string(index.size()) + " for shape " +
                    shape_str(dims_));
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= dims_[axis])
      throw IndexError("index " + std::to_string(i) + " out of bounds on axis " +
                       std::to_string(axis) + " of " + shape_str(dims_));
    off = off * dims_[axis] + i;
    ++axis;
  }
  return off;
}

template <typename T>
T Tensor<T>::at(std::initializer_list<std::size_t> index) const {
  return data_[offset_of(index)];
}

template <typename T>
T& Tensor<T>::at(std::initializer_list<std::size_t> index) {
  return data_[offset_of(index)];
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape dims) const {
  if (shape_numel(dims) != numel())
    throw DimensionError("cannot reshape " + shape_str(dims_) + " to " + shape_str(dims));
  return Tensor(std::move(dims), data_);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace cavit
