#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hebbcnn/error.hpp"

namespace hebb {

struct Shape4 {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t size() const { return n * c * h * w; }
  constexpr std::size_t image_size() const { return c * h * w; }
  constexpr std::size_t plane_size() const { return h * w; }
  friend constexpr bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& s);

// Dense rank-4 array in (n, c, h, w) row-major order.
template <class T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
  Tensor4(Shape4 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    require(data_.size() == shape_.size(), ErrorCode::kDimension,
            "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                to_string(shape_));
  }

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& vector() const { return data_; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[index(n, c, h, w)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[index(n, c, h, w)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* image(std::size_t n) { return data_.data() + n * shape_.image_size(); }
  const T* image(std::size_t n) const { return data_.data() + n * shape_.image_size(); }
  T* plane(std::size_t n, std::size_t c) { return image(n) + c * shape_.plane_size(); }
  const T* plane(std::size_t n, std::size_t c) const { return image(n) + c * shape_.plane_size(); }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  void reshape(Shape4 shape) {
    require(shape.size() == shape_.size(), ErrorCode::kDimension,
            "cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    shape_ = shape;
  }

  template <class U>
  Tensor4<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor4<U>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

using Tensor = Tensor4<float>;

template <class T>
bool all_finite(const Tensor4<T>& t) {
  for (T v : t.values())
    if (!std::isfinite(v)) return false;
  return true;
}

template <class T>
void require_finite(const Tensor4<T>& t, const char* what) {
  require(all_finite(t), ErrorCode::kNumeric, std::string(what) + ": non-finite value");
}

}  // namespace hebb
