#include "petastore/harness/trace.h"

#include <cstdlib>
#include <sstream>

namespace petastore::harness {

std::string_view TraceEvent::arg(std::string_view key) const {
  for (const auto& [k, v] : args) {
    if (k == key) return v;
  }
  return {};
}

bool TraceEvent::has(std::string_view key) const {
  for (const auto& [k, v] : args) {
    if (k == key) return true;
  }
  return false;
}

std::int64_t TraceEvent::int_arg(std::string_view key, std::int64_t fallback) const {
  const std::string v(arg(key));
  if (v.empty()) return fallback;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  return *end == '\0' ? x : fallback;
}

std::string format_trace_line(const TraceEvent& e) {
  std::string out = std::to_string(e.time_us) + '\t' + e.actor + '\t' + e.event + '\t';
  for (std::size_t i = 0; i < e.args.size(); ++i) {
    if (i) out += ' ';
    out += e.args[i].first + '=' + e.args[i].second;
  }
  return out;
}

std::string format_trace(const std::vector<TraceEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    out += format_trace_line(e);
    out += '\n';
  }
  return out;
}

Result<std::vector<TraceEvent>> parse_trace(std::string_view text) {
  std::vector<TraceEvent> out;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    auto bad = [&] { return Error(ErrorCode::kMalformed, "trace line " + std::to_string(line_no)); };
    std::vector<std::string> cols;
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
      const auto tab = line.find('\t', pos);
      if (tab == std::string::npos) return bad();
      cols.push_back(line.substr(pos, tab - pos));
      pos = tab + 1;
    }
    TraceEvent e;
    char* end = nullptr;
    e.time_us = std::strtoll(cols[0].c_str(), &end, 10);
    if (cols[0].empty() || *end != '\0' || cols[1].empty() || cols[2].empty()) return bad();
    e.actor = cols[1];
    e.event = cols[2];
    std::istringstream args(line.substr(pos));
    for (std::string kv; args >> kv;) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) return bad();
      e.args.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace petastore::harness
