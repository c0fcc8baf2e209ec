#pragma once

// nlohmann/json adapters for library value types. Private to src/.

#include <json.hpp>

#include "archspace/dsl.hpp"
#include "archspace/error.hpp"
#include "archspace/graph.hpp"
#include "archspace/path.hpp"
#include "archspace/shape.hpp"

namespace archspace::detail {

using Json = nlohmann::json;

inline Json literal_json(const Literal& v) {
  switch (literal_type(v)) {
    case LiteralType::Integer: return Json(std::get<std::int64_t>(v));
    case LiteralType::Decimal: return Json(std::get<double>(v));
    case LiteralType::String: return Json(std::get<std::string>(v));
  }
  return {};
}

inline Literal json_literal(const Json& j, ErrorCode on_error = ErrorCode::MalformedGraph) {
  if (j.is_number_integer()) return Literal{j.get<std::int64_t>()};
  if (j.is_number_float()) return Literal{j.get<double>()};
  if (j.is_string()) return Literal{j.get<std::string>()};
  throw Error(on_error, "expected an integer, decimal or string literal, got " + j.dump());
}

inline Json shape_json(const Shape& s) { return Json(s.dims()); }

inline Shape json_shape(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::MalformedGraph, "shape must be an array");
  std::vector<std::int64_t> dims;
  for (const auto& d : j) {
    if (!d.is_number_integer()) throw Error(ErrorCode::MalformedGraph, "shape dims must be integers");
    dims.push_back(d.get<std::int64_t>());
  }
  try {
    return Shape(std::move(dims));
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedGraph, e.what());
  }
}

inline Json attrs_json(const Attrs& attrs) {
  Json out = Json::object();
  for (const auto& [k, v] : attrs) out[k] = literal_json(v);
  return out;
}

inline Attrs json_attrs(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::MalformedGraph, "attrs must be an object");
  Attrs out;
  for (auto it = j.begin(); it != j.end(); ++it) out.emplace(it.key(), json_literal(it.value()));
  return out;
}

inline Json path_json(const Path& path) {
  Json out = Json::array();
  for (const auto& s : path.steps)
    out.push_back(Json{{"index", s.index}, {"site", s.site}, {"value", literal_json(s.value)}});
  return out;
}

inline Path json_path(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::MalformedGraph, "path must be an array");
  Path path;
  for (const auto& s : j) {
    if (!s.is_object() || !s.contains("site") || !s.contains("index") || !s.contains("value") ||
        !s["site"].is_string() || !s["index"].is_number_unsigned())
      throw Error(ErrorCode::MalformedGraph, "path step must be {site, index, value}");
    path.steps.push_back({s["site"].get<std::string>(), s["index"].get<std::size_t>(), json_literal(s["value"])});
  }
  return path;
}

}  // namespace archspace::detail
