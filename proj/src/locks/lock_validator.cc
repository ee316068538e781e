#include "petastore/locks/lock_validator.h"

namespace petastore::locks {

void LockSafetyValidator::observe(const LockEvent& e) {
  auto& holders = held_[e.resource];
  const std::string where = "#" + std::to_string(e.seq) + " " + e.resource + " " + e.client;
  switch (e.kind) {
    case LockEvent::Kind::kGrant: {
      if (holders.count(e.client)) violations_.push_back(where + ": granted twice");
      holders[e.client] = e.mode;
      if (holders.size() > 1) {
        for (const auto& [_, mode] : holders) {
          if (mode == LockMode::kUpdate) {
            violations_.push_back(where + ": UPDATE shares the resource");
            break;
          }
        }
      }
      break;
    }
    case LockEvent::Kind::kRelease:
      if (holders.erase(e.client) == 0) violations_.push_back(where + ": release of unheld lock");
      break;
    case LockEvent::Kind::kQueue:
    case LockEvent::Kind::kCancel:
      break;
  }
}

}  // namespace petastore::locks
