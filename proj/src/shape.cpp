#include "archspace/shape.hpp"

#include <charconv>

#include "archspace/error.hpp"

namespace archspace {

namespace {

void check(const std::vector<std::int64_t>& dims) {
  if (dims.empty() || dims.size() > 4)
    throw Error(ErrorCode::InvalidValue, "shape order must be between 1 and 4, got " + std::to_string(dims.size()));
  for (auto d : dims)
    if (d < 1) throw Error(ErrorCode::InvalidValue, "shape dims must be >= 1");
}

}  // namespace

Shape::Shape(std::initializer_list<std::int64_t> dims) : dims_(dims) { check(dims_); }

Shape::Shape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) { check(dims_); }

std::int64_t Shape::elements() const {
  std::int64_t n = 1;
  for (auto d : dims_) n *= d;
  return n;
}

std::string Shape::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) out.push_back(',');
    out += std::to_string(dims_[i]);
  }
  return out;
}

Shape parse_shape(std::string_view text) {
  std::vector<std::int64_t> dims;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view part = text.substr(pos, end - pos);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc() || ptr != part.data() + part.size())
      throw Error(ErrorCode::InvalidValue, "malformed shape '" + std::string(text) + "'");
    dims.push_back(v);
    pos = end + 1;
  }
  return Shape(std::move(dims));
}

}  // namespace archspace
