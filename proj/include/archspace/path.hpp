#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "archspace/dsl.hpp"

namespace archspace {

struct PathStep {
  std::string site;
  std::size_t index = 0;
  Literal value;

  friend bool operator==(const PathStep&, const PathStep&) = default;
};

/// Root-to-leaf decision sequence; one-to-one with fully specified models.
/// Only surfaced (multi-option) choices appear.
struct Path {
  std::vector<PathStep> steps;

  friend bool operator==(const Path&, const Path&) = default;
};

/// JSON array of {"index", "site", "value"} objects, compact, keys sorted.
std::string path_to_json(const Path& path);
/// Throws Error(MalformedGraph) on schema violations.
Path path_from_json(std::string_view text);

}  // namespace archspace
