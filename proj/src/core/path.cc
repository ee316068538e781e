#include "petastore/core/path.h"

namespace petastore {

Result<std::vector<std::string>> split_path(std::string_view path) {
  if (path.empty() || path.front() != '/') {
    return Error(ErrorCode::kInvalidArgument, "path must start with '/': " + std::string(path));
  }
  std::vector<std::string> out;
  if (path.size() == 1) return out;
  std::size_t pos = 1;
  while (true) {
    const auto next = path.find('/', pos);
    const auto seg = path.substr(pos, next == std::string_view::npos ? next : next - pos);
    if (seg.empty()) return Error(ErrorCode::kInvalidArgument, "empty segment in " + std::string(path));
    if (seg.find_first_of("\t\n") != std::string_view::npos) {
      return Error(ErrorCode::kInvalidArgument, "control character in " + std::string(path));
    }
    out.emplace_back(seg);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string join_path(const std::vector<std::string>& segments, std::size_t count) {
  if (count == 0) return "/";
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    out += '/';
    out += segments[i];
  }
  return out;
}

std::string parent_path(std::string_view path) {
  const auto slash = path.rfind('/');
  if (slash == std::string_view::npos || slash == 0) return "/";
  return std::string(path.substr(0, slash));
}

bool path_has_prefix(std::string_view path, std::string_view prefix) {
  if (prefix == "/") return !path.empty() && path.front() == '/';
  if (path.substr(0, prefix.size()) != prefix) return false;
  return path.size() == prefix.size() || path[prefix.size()] == '/';
}

}  // namespace petastore
