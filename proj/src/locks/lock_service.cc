#include "petastore/locks/lock_service.h"

#include <algorithm>
#include <sstream>

namespace petastore::locks {

std::string_view to_string(LockMode m) { return m == LockMode::kRead ? "R" : "U"; }

std::string_view to_string(LockEvent::Kind k) {
  switch (k) {
    case LockEvent::Kind::kGrant:
      return "GRANT";
    case LockEvent::Kind::kQueue:
      return "QUEUE";
    case LockEvent::Kind::kRelease:
      return "RELEASE";
    case LockEvent::Kind::kCancel:
      return "CANCEL";
  }
  return "?";
}

LockService::LockService(const Clock& clock, LockServiceConfig config)
    : clock_(clock), config_(config) {}

void LockService::emit_locked(LockEvent::Kind kind, const std::string& resource,
                              const ClientId& client, LockMode mode) {
  if (!sink_) return;
  sink_(LockEvent{++event_seq_, clock_.now(), kind, resource, client, mode});
}

Status LockService::connect(const ClientId& client) {
  std::lock_guard lock(mu_);
  if (sessions_.count(client)) return Error(ErrorCode::kRejectedDuplicate, client);
  const SimTime now = clock_.now();
  if (sessions_.size() >= config_.max_connections) {
    const bool any_expired = std::any_of(sessions_.begin(), sessions_.end(), [&](const auto& kv) {
      return now - kv.second.last_heartbeat > config_.deadline();
    });
    if (!any_expired) return Error(ErrorCode::kRejectedAtCapacity, client);
    reap_locked(now);
  }
  sessions_.emplace(client, Session{client, now, now});
  return Status::OK();
}

Status LockService::disconnect(const ClientId& client) {
  std::lock_guard lock(mu_);
  if (!sessions_.count(client)) return Error(ErrorCode::kNoSession, client);
  drop_client_locked(client, nullptr, /*promote=*/true);
  sessions_.erase(client);
  granted_cv_.notify_all();
  return Status::OK();
}

bool LockService::compatible_locked(const ResourceState& rs, LockMode mode) const {
  if (mode == LockMode::kUpdate) return rs.holders.empty();
  return std::none_of(rs.holders.begin(), rs.holders.end(),
                      [](const LockEntry& e) { return e.mode == LockMode::kUpdate; });
}

void LockService::grant_locked(const std::string& resource, ResourceState& rs,
                               const ClientId& client, LockMode mode) {
  const auto& session = sessions_.at(client);
  rs.holders.push_back(LockEntry{resource, mode, client, clock_.now(), session.last_heartbeat});
  client_resources_[client].insert(resource);
  ++stats_[resource].grants;
  emit_locked(LockEvent::Kind::kGrant, resource, client, mode);
}

void LockService::promote_locked(const std::string& resource, ResourceState& rs) {
  bool any = false;
  while (!rs.queue.empty() && compatible_locked(rs, rs.queue.front().mode)) {
    Waiter w = std::move(rs.queue.front());
    rs.queue.pop_front();
    grant_locked(resource, rs, w.client, w.mode);
    any = true;
  }
  if (any) granted_cv_.notify_all();
}

Result<AcquireReply> LockService::acquire(const ClientId& client, const std::string& resource,
                                          LockMode mode) {
  std::lock_guard lock(mu_);
  if (!sessions_.count(client)) return Error(ErrorCode::kNoSession, client);
  ++requests_;
  auto& rs = resources_[resource];
  const bool already =
      std::any_of(rs.holders.begin(), rs.holders.end(),
                  [&](const LockEntry& e) { return e.holder == client; }) ||
      std::any_of(rs.queue.begin(), rs.queue.end(),
                  [&](const Waiter& w) { return w.client == client; });
  if (already) return Error(ErrorCode::kAlreadyHeld, resource);

  if (rs.queue.empty() && compatible_locked(rs, mode)) {
    grant_locked(resource, rs, client, mode);
    return AcquireReply{AcquireReply::Outcome::kGranted, 0};
  }
  rs.queue.push_back(Waiter{client, mode});
  client_resources_[client].insert(resource);
  auto& st = stats_[resource];
  ++st.collisions;
  st.max_queue = std::max(st.max_queue, rs.queue.size());
  emit_locked(LockEvent::Kind::kQueue, resource, client, mode);
  return AcquireReply{AcquireReply::Outcome::kQueued, rs.queue.size()};
}

Status LockService::release(const ClientId& client, const std::string& resource) {
  std::lock_guard lock(mu_);
  auto it = resources_.find(resource);
  if (it == resources_.end()) return Error(ErrorCode::kNotHeld, resource);
  auto& holders = it->second.holders;
  auto h = std::find_if(holders.begin(), holders.end(),
                        [&](const LockEntry& e) { return e.holder == client; });
  if (h == holders.end()) return Error(ErrorCode::kNotHeld, resource);
  const LockMode mode = h->mode;
  holders.erase(h);
  forget_locked(client, resource);
  emit_locked(LockEvent::Kind::kRelease, resource, client, mode);
  promote_locked(resource, it->second);
  return Status::OK();
}

Status LockService::cancel(const ClientId& client, const std::string& resource) {
  std::lock_guard lock(mu_);
  auto it = resources_.find(resource);
  if (it == resources_.end()) return Error(ErrorCode::kNotHeld, resource);
  auto& q = it->second.queue;
  auto w = std::find_if(q.begin(), q.end(), [&](const Waiter& x) { return x.client == client; });
  if (w == q.end()) return Error(ErrorCode::kNotHeld, resource);
  const LockMode mode = w->mode;
  q.erase(w);
  forget_locked(client, resource);
  emit_locked(LockEvent::Kind::kCancel, resource, client, mode);
  // The withdrawn request may have been the one blocking the head of the queue.
  promote_locked(resource, it->second);
  return Status::OK();
}

Status LockService::heartbeat(const ClientId& client, SimTime now) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(client);
  if (it == sessions_.end()) return Error(ErrorCode::kNoSession, client);
  it->second.last_heartbeat = std::max(it->second.last_heartbeat, now);
  if (auto cr = client_resources_.find(client); cr != client_resources_.end()) {
    for (const auto& resource : cr->second) {
      for (auto& e : resources_[resource].holders) {
        if (e.holder == client) e.last_heartbeat = it->second.last_heartbeat;
      }
    }
  }
  return Status::OK();
}

void LockService::drop_client_locked(const ClientId& client, std::vector<LockEntry>* released,
                                     bool promote) {
  auto cr = client_resources_.find(client);
  if (cr == client_resources_.end()) return;
  const std::set<std::string> touched = std::move(cr->second);
  client_resources_.erase(cr);
  for (const auto& resource : touched) {
    auto& rs = resources_[resource];
    bool changed = false;
    for (auto w = rs.queue.begin(); w != rs.queue.end();) {
      if (w->client == client) {
        emit_locked(LockEvent::Kind::kCancel, resource, client, w->mode);
        w = rs.queue.erase(w);
        changed = true;
      } else {
        ++w;
      }
    }
    for (auto h = rs.holders.begin(); h != rs.holders.end();) {
      if (h->holder == client) {
        if (released) released->push_back(*h);
        emit_locked(LockEvent::Kind::kRelease, resource, client, h->mode);
        h = rs.holders.erase(h);
        changed = true;
      } else {
        ++h;
      }
    }
    if (changed && promote) promote_locked(resource, rs);
  }
}

void LockService::forget_locked(const ClientId& client, const std::string& resource) {
  auto it = client_resources_.find(client);
  if (it == client_resources_.end()) return;
  it->second.erase(resource);
  if (it->second.empty()) client_resources_.erase(it);
}

std::vector<LockEntry> LockService::reap_locked(SimTime now) {
  std::vector<LockEntry> released;
  bool any = false;
  // Drop every expired session before promoting waiters, so nothing is
  // granted to a client that is itself about to be reaped.
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (now - it->second.last_heartbeat > config_.deadline()) {
      drop_client_locked(it->first, &released, /*promote=*/false);
      it = sessions_.erase(it);
      any = true;
    } else {
      ++it;
    }
  }
  if (any) {
    for (auto& [resource, rs] : resources_) promote_locked(resource, rs);
    granted_cv_.notify_all();
  }
  return released;
}

std::vector<LockEntry> LockService::reap_orphans(SimTime now) {
  std::lock_guard lock(mu_);
  return reap_locked(now);
}

Status LockService::acquire_wait(const ClientId& client, const std::string& resource,
                                 LockMode mode, std::chrono::milliseconds timeout) {
  auto reply = acquire(client, resource, mode);
  if (!reply.ok()) return reply.error();
  if (reply->granted()) return Status::OK();

  std::unique_lock lock(mu_);
  auto held = [&] {
    auto it = resources_.find(resource);
    return it != resources_.end() &&
           std::any_of(it->second.holders.begin(), it->second.holders.end(),
                       [&](const LockEntry& e) { return e.holder == client; });
  };
  const bool ok = granted_cv_.wait_for(lock, timeout, [&] { return held() || !sessions_.count(client); });
  if (ok && held()) return Status::OK();
  if (!sessions_.count(client)) return Error(ErrorCode::kNoSession, client);
  lock.unlock();
  (void)cancel(client, resource);
  return Error(ErrorCode::kLockTimeout, resource);
}

bool LockService::has_session(const ClientId& client) const {
  std::lock_guard lock(mu_);
  return sessions_.count(client) != 0;
}

std::size_t LockService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::vector<Session> LockService::sessions() const {
  std::lock_guard lock(mu_);
  std::vector<Session> out;
  for (const auto& [_, s] : sessions_) out.push_back(s);
  return out;
}

bool LockService::holds(const ClientId& client, const std::string& resource) const {
  std::lock_guard lock(mu_);
  auto it = resources_.find(resource);
  if (it == resources_.end()) return false;
  return std::any_of(it->second.holders.begin(), it->second.holders.end(),
                     [&](const LockEntry& e) { return e.holder == client; });
}

std::vector<LockEntry> LockService::holders(const std::string& resource) const {
  std::lock_guard lock(mu_);
  auto it = resources_.find(resource);
  return it == resources_.end() ? std::vector<LockEntry>{} : it->second.holders;
}

std::vector<LockEntry> LockService::all_locks() const {
  std::lock_guard lock(mu_);
  std::vector<LockEntry> out;
  for (const auto& [_, rs] : resources_) out.insert(out.end(), rs.holders.begin(), rs.holders.end());
  return out;
}

std::size_t LockService::queue_length(const std::string& resource) const {
  std::lock_guard lock(mu_);
  auto it = resources_.find(resource);
  return it == resources_.end() ? 0 : it->second.queue.size();
}

std::map<std::string, ResourceStats> LockService::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::uint64_t LockService::total_collisions() const {
  std::lock_guard lock(mu_);
  std::uint64_t n = 0;
  for (const auto& [_, s] : stats_) n += s.collisions;
  return n;
}

std::uint64_t LockService::total_requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::string LockService::stats_tsv() const {
  std::lock_guard lock(mu_);
  std::ostringstream out;
  out << "resource\tgrants\tcollisions\tmax_queue\n";
  for (const auto& [r, s] : stats_) {
    out << r << '\t' << s.grants << '\t' << s.collisions << '\t' << s.max_queue << '\n';
  }
  return out.str();
}

void LockService::set_event_sink(std::function<void(const LockEvent&)> sink) {
  std::lock_guard lock(mu_);
  sink_ = std::move(sink);
}

}  // namespace petastore::locks
