#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace dmoe {

// Dense row-major three-index array; the last index is contiguous.
template <class T>
class Array3 {
 public:
  Array3() = default;
  Array3(std::size_t n0, std::size_t n1, std::size_t n2, const T& fill = T{})
      : n0_(n0), n1_(n1), n2_(n2), data_(n0 * n1 * n2, fill) {}

  T& operator()(std::size_t a, std::size_t b, std::size_t c) {
    assert(a < n0_ && b < n1_ && c < n2_);
    return data_[(a * n1_ + b) * n2_ + c];
  }
  const T& operator()(std::size_t a, std::size_t b, std::size_t c) const {
    assert(a < n0_ && b < n1_ && c < n2_);
    return data_[(a * n1_ + b) * n2_ + c];
  }

  std::span<T> row(std::size_t a, std::size_t b) {
    return {data_.data() + (a * n1_ + b) * n2_, n2_};
  }
  std::span<const T> row(std::size_t a, std::size_t b) const {
    return {data_.data() + (a * n1_ + b) * n2_, n2_};
  }

  std::size_t extent0() const { return n0_; }
  std::size_t extent1() const { return n1_; }
  std::size_t extent2() const { return n2_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Array3&) const = default;

 private:
  std::size_t n0_ = 0;
  std::size_t n1_ = 0;
  std::size_t n2_ = 0;
  std::vector<T> data_;
};

}  // namespace dmoe
