#pragma once

#include <map>
#include <string>
#include <vector>

#include "petastore/locks/lock_service.h"

namespace petastore::locks {

// Replays a lock event log and flags any instant at which an UPDATE holder
// coexists with another holder on the same resource, or a release names a
// lock that was not held.
class LockSafetyValidator {
 public:
  void observe(const LockEvent& e);

  std::size_t violations() const { return violations_.size(); }
  const std::vector<std::string>& violation_log() const { return violations_; }

 private:
  std::map<std::string, std::map<ClientId, LockMode>> held_;
  std::vector<std::string> violations_;
};

}  // namespace petastore::locks
