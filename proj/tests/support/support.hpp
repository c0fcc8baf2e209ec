#pragma once

// Shared test fixtures: random space generator and independent oracles.

#include <cstdint>
#include <string>
#include <vector>

#include "archspace/dsl.hpp"
#include "archspace/path.hpp"
#include "archspace/random.hpp"
#include "archspace/shape.hpp"

namespace testsupport {

using archspace::Literal;
using archspace::Rng;
using archspace::SpaceExpr;

struct GenOptions {
  int max_depth = 4;
  int max_children = 3;
  int max_values = 3;
  /// Include Conv2D and MaxPooling2D (meant for [H,W,C] inputs). Without
  /// them every generated space is shape-valid on any order-1 input.
  bool spatial = false;
  /// Allow decimals, strings and initializer lists in odd places (DSL tests).
  bool exotic_literals = false;
};

SpaceExpr random_space(Rng& rng, const GenOptions& opt);

/// Draws spaces until one has at most `max_leaves` leaves by the oracle.
SpaceExpr random_bounded_space(Rng& rng, const GenOptions& opt, std::uint64_t max_leaves);

/// Leaf count by explicitly listing every leaf's decision string; returns
/// cap + 1 once the count exceeds cap. Shares no code with the library.
std::uint64_t brute_force_leaf_count(const SpaceExpr& e, std::uint64_t cap = 200'000);

/// Number of window positions a sliding window visits along one axis.
std::int64_t sliding_window_count(std::int64_t in, std::int64_t kernel, std::int64_t stride, bool same_padding);

std::string fixture_path(const std::string& name);
std::string read_fixture(const std::string& name);

/// The four-module space with 24 models.
SpaceExpr small_space();
inline archspace::Shape image_shape() { return archspace::Shape({32, 32, 3}); }
/// 64 filters of size 3, batch norm before ReLU, no dropout.
archspace::Path reference_path();

}  // namespace testsupport
