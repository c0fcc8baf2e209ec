#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace archspace {

/// Tensor dimensions, order 1 to 4. Convolutional tensors are [height, width, channels].
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::int64_t> dims);
  explicit Shape(std::vector<std::int64_t> dims);

  const std::vector<std::int64_t>& dims() const noexcept { return dims_; }
  std::size_t order() const noexcept { return dims_.size(); }
  std::int64_t operator[](std::size_t i) const { return dims_[i]; }
  std::int64_t last() const { return dims_.back(); }
  std::int64_t elements() const;

  std::string to_string() const;  // "32,32,3"

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::int64_t> dims_;
};

/// Parses "H,W,C" or "D". Throws Error(InvalidValue).
Shape parse_shape(std::string_view text);

}  // namespace archspace
