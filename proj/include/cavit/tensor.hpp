#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "cavit/errors.hpp"

namespace cavit {

using Shape = std::vector<std::size_t>;

inline constexpr std::size_t kMaxRank = 4;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

/// Dense row-major array of rank 1 to 4.
///
/// Tensors are plain values: copying copies the data. The batch axis, when
/// present, is axis 0. Scalars are represented as rank-1 tensors of extent 1.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape dims);
  Tensor(Shape dims, std::vector<T> data);

  static Tensor zeros(Shape dims) { return Tensor(std::move(dims)); }
  static Tensor full(Shape dims, T value);
  static Tensor ones(Shape dims) { return full(std::move(dims), T(1)); }
  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return dims_.empty(); }

  /// Extent of `axis`; negative values count from the back.
  std::size_t dim(int axis) const;

  std::span<const T> data() const noexcept { return data_; }
  std::span<T> data() noexcept { return data_; }
  const std::vector<T>& vec() const noexcept { return data_; }

  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  T at(std::initializer_list<std::size_t> index) const;
  T& at(std::initializer_list<std::size_t> index);

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape dims) const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(dims_, std::move(out));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t offset_of(std::initializer_list<std::size_t> index) const;

  Shape dims_;
  std::vector<T> data_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace cavit
