#include "archspace/path.hpp"

#include "json_util.hpp"

namespace archspace {

std::string path_to_json(const Path& path) { return detail::path_json(path).dump(); }

Path path_from_json(std::string_view text) {
  detail::Json j = detail::Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(ErrorCode::MalformedGraph, "path is not valid JSON");
  return detail::json_path(j);
}

}  // namespace archspace
