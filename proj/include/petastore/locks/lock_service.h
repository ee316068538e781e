#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "petastore/core/result.h"
#include "petastore/core/time.h"

namespace petastore::locks {

using ClientId = std::string;

enum class LockMode : std::uint8_t { kRead, kUpdate };

std::string_view to_string(LockMode m);

struct LockEntry {
  std::string resource;
  LockMode mode = LockMode::kRead;
  ClientId holder;
  SimTime granted_at;
  SimTime last_heartbeat;

  bool operator==(const LockEntry&) const = default;
};

struct Session {
  ClientId client;
  SimTime connected_at;
  SimTime last_heartbeat;
};

struct LockServiceConfig {
  std::size_t max_connections = 1024;
  SimDuration heartbeat_interval = seconds(5);
  int deadline_intervals = 3;

  SimDuration deadline() const { return heartbeat_interval * deadline_intervals; }
};

struct AcquireReply {
  enum class Outcome { kGranted, kQueued };
  Outcome outcome = Outcome::kGranted;
  // 1-based position in the resource's wait queue when queued.
  std::size_t queue_position = 0;

  bool granted() const { return outcome == Outcome::kGranted; }
};

struct ResourceStats {
  std::uint64_t grants = 0;
  std::uint64_t collisions = 0;
  std::size_t max_queue = 0;
};

// Linearized record of every lock-table mutation, in the order applied.
struct LockEvent {
  enum class Kind { kGrant, kQueue, kRelease, kCancel };
  std::uint64_t seq = 0;
  SimTime at;
  Kind kind = Kind::kGrant;
  std::string resource;
  ClientId client;
  LockMode mode = LockMode::kRead;
};

std::string_view to_string(LockEvent::Kind k);

// READ/UPDATE lock table with bounded sessions and heartbeat-based reaping.
//
// A resource has either any number of READ holders or exactly one UPDATE
// holder. Requests that cannot be granted wait in a FIFO queue; a request is
// granted on arrival only if the queue is empty, so readers cannot starve a
// queued writer. When holders leave, the longest-waiting run of compatible
// requests is granted together.
//
// All mutations go through one mutex and are applied in a total order.
class LockService {
 public:
  explicit LockService(const Clock& clock, LockServiceConfig config = {});

  const LockServiceConfig& config() const { return config_; }

  // kRejectedAtCapacity leaves the service untouched. At capacity, sessions
  // already past the keepalive deadline are reaped first to make room.
  Status connect(const ClientId& client);
  // Orderly close: the session's locks and queued requests are dropped.
  Status disconnect(const ClientId& client);

  Result<AcquireReply> acquire(const ClientId& client, const std::string& resource, LockMode mode);
  Status release(const ClientId& client, const std::string& resource);
  // Withdraws a queued (not yet granted) request.
  Status cancel(const ClientId& client, const std::string& resource);
  Status heartbeat(const ClientId& client, SimTime now);

  // Closes every session whose last heartbeat is more than the deadline
  // before `now`, releasing its locks. Returns the released locks.
  std::vector<LockEntry> reap_orphans(SimTime now);

  // Acquire and block the calling thread until granted. On timeout the queued
  // request is withdrawn and kLockTimeout returned.
  Status acquire_wait(const ClientId& client, const std::string& resource, LockMode mode,
                      std::chrono::milliseconds timeout);

  bool has_session(const ClientId& client) const;
  std::size_t session_count() const;
  std::vector<Session> sessions() const;
  bool holds(const ClientId& client, const std::string& resource) const;
  std::vector<LockEntry> holders(const std::string& resource) const;
  std::vector<LockEntry> all_locks() const;
  std::size_t queue_length(const std::string& resource) const;

  std::map<std::string, ResourceStats> stats() const;
  std::uint64_t total_collisions() const;
  std::uint64_t total_requests() const;
  // Tab-separated: resource, grants, collisions, max_queue (with header).
  std::string stats_tsv() const;

  // Receives every lock-table event while the lock is held; keep it cheap.
  void set_event_sink(std::function<void(const LockEvent&)> sink);

 private:
  struct Waiter {
    ClientId client;
    LockMode mode;
  };
  struct ResourceState {
    std::vector<LockEntry> holders;
    std::deque<Waiter> queue;
  };

  bool compatible_locked(const ResourceState& rs, LockMode mode) const;
  void grant_locked(const std::string& resource, ResourceState& rs, const ClientId& client,
                    LockMode mode);
  void promote_locked(const std::string& resource, ResourceState& rs);
  void drop_client_locked(const ClientId& client, std::vector<LockEntry>* released,
                          bool promote);
  void forget_locked(const ClientId& client, const std::string& resource);
  std::vector<LockEntry> reap_locked(SimTime now);
  void emit_locked(LockEvent::Kind kind, const std::string& resource, const ClientId& client,
                   LockMode mode);

  const Clock& clock_;
  LockServiceConfig config_;

  mutable std::mutex mu_;
  std::condition_variable granted_cv_;
  std::map<ClientId, Session> sessions_;
  std::map<std::string, ResourceState> resources_;
  std::map<std::string, ResourceStats> stats_;
  // Resources each client holds or waits on.
  std::map<ClientId, std::set<std::string>> client_resources_;
  std::uint64_t requests_ = 0;
  std::uint64_t event_seq_ = 0;
  std::function<void(const LockEvent&)> sink_;
};

// Releases a lock taken through LockService::acquire_wait on scope exit.
class ScopedLock {
 public:
  ScopedLock() = default;
  ScopedLock(LockService* service, ClientId client, std::string resource)
      : service_(service), client_(std::move(client)), resource_(std::move(resource)) {}
  ScopedLock(ScopedLock&& other) noexcept { *this = std::move(other); }
  ScopedLock& operator=(ScopedLock&& other) noexcept {
    if (this != &other) {
      reset();
      service_ = std::exchange(other.service_, nullptr);
      client_ = std::move(other.client_);
      resource_ = std::move(other.resource_);
    }
    return *this;
  }
  ScopedLock(const ScopedLock&) = delete;
  ScopedLock& operator=(const ScopedLock&) = delete;
  ~ScopedLock() { reset(); }

  void reset() {
    if (service_ != nullptr) (void)service_->release(client_, resource_);
    service_ = nullptr;
  }

 private:
  LockService* service_ = nullptr;
  ClientId client_;
  std::string resource_;
};

}  // namespace petastore::locks
