#include "petastore/locks/lock_protocol.h"

#include <sstream>
#include <vector>

namespace petastore::locks {
namespace {

std::vector<std::string> split_words(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

std::string err(ErrorCode code) { return "ERR " + std::string(to_string(code)); }

std::string reply(const Status& st) { return st.ok() ? "OK" : err(st.code()); }

}  // namespace

std::string LockProtocol::handle(std::string_view line) {
  const auto w = split_words(line);
  if (w.empty()) return err(ErrorCode::kMalformed);
  const std::string& verb = w[0];
  if (verb == "CONN" && w.size() == 2) return reply(service_.connect(w[1]));
  if (verb == "PING" && w.size() == 2) return reply(service_.heartbeat(w[1], clock_.now()));
  if (verb == "UNLK" && w.size() == 3) return reply(service_.release(w[1], w[2]));
  if (verb == "LOCK" && w.size() == 4) {
    LockMode mode;
    if (w[3] == "R") {
      mode = LockMode::kRead;
    } else if (w[3] == "U") {
      mode = LockMode::kUpdate;
    } else {
      return err(ErrorCode::kMalformed);
    }
    auto r = service_.acquire(w[1], w[2], mode);
    if (!r.ok()) return err(r.code());
    if (r->granted()) return "GRANT";
    return "QUEUE " + std::to_string(r->queue_position);
  }
  return err(ErrorCode::kMalformed);
}

}  // namespace petastore::locks
