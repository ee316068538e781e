#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "petastore/core/result.h"

namespace petastore::harness {

// One trace line: time_us \t actor \t event \t args, where args are
// space-separated key=value pairs. Values never contain spaces or tabs.
struct TraceEvent {
  std::int64_t time_us = 0;
  std::string actor;
  std::string event;
  std::vector<std::pair<std::string, std::string>> args;

  // Empty when absent.
  std::string_view arg(std::string_view key) const;
  std::int64_t int_arg(std::string_view key, std::int64_t fallback = 0) const;
  bool has(std::string_view key) const;

  bool operator==(const TraceEvent&) const = default;
};

std::string format_trace_line(const TraceEvent& e);
std::string format_trace(const std::vector<TraceEvent>& events);
Result<std::vector<TraceEvent>> parse_trace(std::string_view text);

}  // namespace petastore::harness
