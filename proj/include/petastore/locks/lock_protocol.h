#pragma once

#include <string>
#include <string_view>

#include "petastore/locks/lock_service.h"

namespace petastore::locks {

// Line protocol, one request per line:
//
//   CONN <client>                 -> OK | ERR <code>
//   LOCK <client> <resource> R|U  -> GRANT | QUEUE <pos> | ERR <code>
//   UNLK <client> <resource>      -> OK | ERR <code>
//   PING <client>                 -> OK | ERR <code>
//
// PING heartbeats at the service clock's current time.
class LockProtocol {
 public:
  explicit LockProtocol(LockService& service, const Clock& clock)
      : service_(service), clock_(clock) {}

  std::string handle(std::string_view line);

 private:
  LockService& service_;
  const Clock& clock_;
};

}  // namespace petastore::locks
