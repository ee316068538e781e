#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "petastore/core/result.h"

namespace petastore {

// Splits "/a/b/c" into {"a", "b", "c"}. The path must be absolute and every
// segment non-empty; "/" alone is the empty path.
Result<std::vector<std::string>> split_path(std::string_view path);
std::string join_path(const std::vector<std::string>& segments, std::size_t count);

// Parent directory of a collection path ("/a/b" -> "/a", "/a" -> "/").
std::string parent_path(std::string_view path);

// True when `prefix` equals `path` or is a whole-segment ancestor of it.
bool path_has_prefix(std::string_view path, std::string_view prefix);

}  // namespace petastore
