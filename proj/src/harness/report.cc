#include "petastore/harness/report.h"

#include <cstdio>
#include <set>
#include <sstream>

#include "petastore/locks/lock_validator.h"

namespace petastore::harness {
namespace {

using SlaveFile = std::pair<std::string, std::string>;

struct SlaveState {
  bool admin = true;
  bool alive = true;
};

// Replays residency, slave status and open handles to check the redirector
// and purge rules at each decision row.
class Replay {
 public:
  void apply(const TraceEvent& e, MetricsReport& r) {
    const std::string file(e.arg("file"));
    const std::string slave(e.arg("slave"));
    const std::string& ev = e.event;
    if (ev == "SLAVE") {
      slaves_[slave];
    } else if (ev == "PUT") {
      resident_.insert({slave, file});
      if (e.arg("tertiary") == "1") tertiary_.insert(file);
      slaves_[slave];
    } else if (ev == "PLACE" || ev == "STAGED" || ev == "REPLICATED") {
      resident_.insert({slave, file});
    } else if (ev == "REBUILD") {
      resident_.clear();
      for (auto& [id, s] : slaves_) s = SlaveState{};
      power_on_ = true;
    } else if (ev == "POWER_OFF") {
      power_on_ = false;
      handles_.clear();
      locks_ = locks::LockSafetyValidator();
      lock_seq_ = 0;
    } else if (ev == "POWER_ON") {
      power_on_ = true;
    } else if (ev == "SLAVE_OFFLINE") {
      slaves_[slave].admin = false;
    } else if (ev == "SLAVE_ONLINE") {
      slaves_[slave].admin = true;
    } else if (ev == "SLAVE_STALE") {
      slaves_[slave].alive = false;
    } else if (ev == "SLAVE_ALIVE") {
      slaves_[slave].alive = true;
    } else if (ev == "CONN_OPEN") {
      ++handles_[{slave, file}];
    } else if (ev == "CONN_CLOSE") {
      auto it = handles_.find({slave, file});
      if (it != handles_.end() && --it->second == 0) handles_.erase(it);
    } else if (ev == "REDIRECT") {
      if (!online(slave) || !resident_.count({slave, file})) ++r.violations.redirect;
    } else if (ev == "PURGE") {
      const bool open = handles_.count({slave, file}) > 0;
      bool other = false;
      for (const auto& [id, s] : slaves_) {
        other |= id != slave && online(id) && resident_.count({id, file});
      }
      if (open || (!tertiary_.count(file) && !other)) ++r.violations.purge;
      resident_.erase({slave, file});
      torn_.erase({slave, file});
    } else if (ev == "TORN_WRITE" && e.arg("applied") == "1") {
      torn_[{slave, file}].insert(e.int_arg("block"));
    } else if (ev == "APPLY") {
      const std::string to(e.arg("to"));
      if (e.arg("kind") == "REPLICATE") {
        auto it = torn_.find({std::string(e.arg("from")), file});
        if (it != torn_.end()) {
          torn_[{to, file}] = it->second;
        } else {
          torn_.erase({to, file});
        }
      } else {
        torn_.erase({to, file});
      }
    } else if (ev == "READ") {
      const auto result = e.arg("result");
      if (result != "OK" && result != "CHECKSUM_MISMATCH") return;
      bool hit = false;
      if (auto it = torn_.find({slave, file}); it != torn_.end()) {
        for (auto b : it->second) {
          hit |= b >= e.int_arg("first_block") && b <= e.int_arg("last_block");
        }
      }
      if (hit != (result == "CHECKSUM_MISMATCH")) ++r.violations.torn;
    } else if (e.actor == "locks" && (ev == "GRANT" || ev == "RELEASE")) {
      locks::LockEvent le;
      le.seq = ++lock_seq_;
      le.kind = ev == "GRANT" ? locks::LockEvent::Kind::kGrant : locks::LockEvent::Kind::kRelease;
      le.resource = std::string(e.arg("resource"));
      le.client = std::string(e.arg("client"));
      le.mode = e.arg("mode") == "U" ? locks::LockMode::kUpdate : locks::LockMode::kRead;
      locks_.observe(le);
    }
  }

  std::uint64_t lock_violations() const { return locks_.violations(); }

 private:
  bool online(const std::string& slave) const {
    auto it = slaves_.find(slave);
    return power_on_ && it != slaves_.end() && it->second.admin && it->second.alive;
  }

  bool power_on_ = true;
  std::map<std::string, SlaveState> slaves_;
  std::set<SlaveFile> resident_;
  std::set<std::string> tertiary_;
  std::map<SlaveFile, int> handles_;
  std::map<SlaveFile, std::set<std::int64_t>> torn_;
  locks::LockSafetyValidator locks_;
  std::uint64_t lock_seq_ = 0;
};

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

double compute_availability(const std::vector<TraceEvent>& trace) {
  std::uint64_t attempted = 0, ok = 0;
  for (const auto& e : trace) {
    if (e.event != "READ_RESULT") continue;
    ++attempted;
    ok += e.arg("ok") == "1";
  }
  return attempted == 0 ? 1.0 : static_cast<double>(ok) / static_cast<double>(attempted);
}

MetricsReport compute_report(const std::vector<TraceEvent>& trace) {
  MetricsReport r;
  Replay replay;
  std::map<std::string, int> open_ends;  // open id -> terminal count
  std::set<std::string> opened;
  std::uint64_t conns = 0;
  std::map<SlaveFile, std::uint64_t> files;
  std::map<std::string, int> waiting;  // client -> queued requests outstanding
  for (const auto& e : trace) {
    replay.apply(e, r);
    const std::string& ev = e.event;
    if (ev == "LOCK_GRANTED" || ev == "CRASH" || (ev == "JOB_END" && e.arg("status") == "ABORTED")) {
      waiting.erase(e.actor);
    }
    if (ev == "READ_RESULT") {
      ++r.reads_attempted;
      r.reads_ok += e.arg("ok") == "1";
    } else if (ev == "READ" && e.arg("result") == "CHECKSUM_MISMATCH") {
      ++r.checksum_failures;
    } else if (ev == "LOCK_REQ") {
      const auto res = e.arg("result");
      if (res == "GRANT" || res == "QUEUE") ++r.lock_requests;
      if (res == "QUEUE") {
        ++r.lock_collisions;
        ++waiting[e.actor];
      }
    } else if (ev == "CONN_OPEN") {
      ++conns;
      ++files[{std::string(e.arg("slave")), std::string(e.arg("file"))}];
      r.open_connections_peak = std::max(r.open_connections_peak, conns);
      r.open_files_peak = std::max<std::uint64_t>(r.open_files_peak, files.size());
    } else if (ev == "CONN_CLOSE") {
      if (conns > 0) --conns;
      auto it = files.find({std::string(e.arg("slave")), std::string(e.arg("file"))});
      if (it != files.end() && --it->second == 0) files.erase(it);
    } else if (ev == "REDIRECT") {
      ++r.redirect_histogram[std::string(e.arg("slave"))];
    } else if (ev == "PUT") {
      r.logical_bytes += static_cast<std::uint64_t>(e.int_arg("logical"));
      r.physical_bytes += static_cast<std::uint64_t>(e.int_arg("physical"));
    } else if (ev == "STAGE") {
      ++r.staging_count;
    } else if (ev == "REPLICATE") {
      ++r.replicate_count;
    } else if (ev == "PURGE") {
      ++r.purge_count;
    } else if (ev == "CRASH") {
      ++r.crashed_clients;
      r.update_locks_held_at_crash += static_cast<std::uint64_t>(e.int_arg("update_held"));
    } else if (ev == "REAP") {
      ++r.orphan_locks_reaped;
      r.orphan_update_locks_reaped += e.arg("mode") == "U";
      r.max_reap_latency_us = std::max(r.max_reap_latency_us, e.int_arg("latency_us"));
    } else if (ev == "OPEN") {
      ++r.opens;
      const std::string id = e.actor + "/" + std::string(e.arg("id"));
      if (!opened.insert(id).second) ++r.violations.conservation;
    } else if (ev == "OPEN_END") {
      const std::string id = e.actor + "/" + std::string(e.arg("id"));
      ++open_ends[id];
      const auto st = e.arg("status");
      if (st == "DONE") {
        ++r.opens_done;
      } else if (st == "CRASH") {
        ++r.opens_crash;
      } else {
        ++r.opens_err;
      }
    } else if (ev == "QUIESCENT") {
      r.sessions_at_end = e.int_arg("sessions", -1);
      r.live_clients_at_end = e.int_arg("live", -1);
      r.lock_queue_at_end = e.int_arg("queued", -1);
    }
  }
  for (const auto& id : opened) {
    auto it = open_ends.find(id);
    if (it == open_ends.end() || it->second != 1) ++r.violations.conservation;
  }
  for (const auto& [id, n] : open_ends) {
    if (!opened.count(id)) ++r.violations.conservation;
  }
  for (const auto& [client, n] : waiting) r.lock_waits_unresolved += static_cast<std::uint64_t>(n);
  r.violations.lock_safety = replay.lock_violations();
  r.availability = r.reads_attempted == 0 ? 1.0
                                          : static_cast<double>(r.reads_ok) /
                                                static_cast<double>(r.reads_attempted);
  r.lock_collision_rate = r.lock_requests == 0 ? 0.0
                                               : static_cast<double>(r.lock_collisions) /
                                                     static_cast<double>(r.lock_requests);
  r.compression_ratio = r.physical_bytes == 0 ? 0.0
                                              : static_cast<double>(r.logical_bytes) /
                                                    static_cast<double>(r.physical_bytes);
  return r;
}

std::string MetricsReport::to_kv() const {
  std::ostringstream o;
  o << "availability=" << fixed(availability) << "\nreads_attempted=" << reads_attempted
    << "\nreads_ok=" << reads_ok << "\nchecksum_failures=" << checksum_failures
    << "\nlock_requests=" << lock_requests << "\nlock_collisions=" << lock_collisions
    << "\nlock_collision_rate=" << fixed(lock_collision_rate)
    << "\nlock_waits_unresolved=" << lock_waits_unresolved
    << "\nopen_connections_peak=" << open_connections_peak
    << "\nopen_files_peak=" << open_files_peak;
  for (const auto& [slave, n] : redirect_histogram) o << "\nredirects." << slave << "=" << n;
  o << "\ncompression_ratio=" << fixed(compression_ratio) << "\nstaging_count=" << staging_count
    << "\nreplicate_count=" << replicate_count << "\npurge_count=" << purge_count
    << "\ncrashed_clients=" << crashed_clients
    << "\nupdate_locks_held_at_crash=" << update_locks_held_at_crash
    << "\norphan_locks_reaped=" << orphan_locks_reaped
    << "\norphan_update_locks_reaped=" << orphan_update_locks_reaped
    << "\nmax_reap_latency_us=" << max_reap_latency_us << "\nopens=" << opens
    << "\nopens_done=" << opens_done << "\nopens_err=" << opens_err
    << "\nopens_crash=" << opens_crash << "\nsessions_at_end=" << sessions_at_end
    << "\nlive_clients_at_end=" << live_clients_at_end
    << "\nlock_queue_at_end=" << lock_queue_at_end
    << "\nviolations.redirect=" << violations.redirect
    << "\nviolations.purge=" << violations.purge
    << "\nviolations.conservation=" << violations.conservation
    << "\nviolations.lock_safety=" << violations.lock_safety
    << "\nviolations.torn=" << violations.torn << "\n";
  return o.str();
}

std::string MetricsReport::to_text() const {
  std::ostringstream o;
  auto row = [&](const std::string& k, const std::string& v) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "  %-28s %s\n", k.c_str(), v.c_str());
    o << buf;
  };
  o << "metric                         value\n";
  row("availability", fixed(availability) + " (" + std::to_string(reads_ok) + "/" +
                          std::to_string(reads_attempted) + ")");
  row("checksum failures", std::to_string(checksum_failures));
  row("lock collision rate", fixed(lock_collision_rate));
  row("peak open connections", std::to_string(open_connections_peak));
  row("peak open files", std::to_string(open_files_peak));
  for (const auto& [slave, n] : redirect_histogram) row("redirects to " + slave, std::to_string(n));
  row("compression ratio", fixed(compression_ratio));
  row("stagings / replicas / purges", std::to_string(staging_count) + " / " +
                                          std::to_string(replicate_count) + " / " +
                                          std::to_string(purge_count));
  row("client crashes", std::to_string(crashed_clients));
  row("orphan locks reaped", std::to_string(orphan_locks_reaped));
  row("max reap latency (s)", fixed(static_cast<double>(max_reap_latency_us) / 1e6));
  row("sessions / live at end",
      std::to_string(sessions_at_end) + " / " + std::to_string(live_clients_at_end));
  row("validator violations", std::to_string(violations.total()));
  o << "\n" << to_kv();
  return o.str();
}

}  // namespace petastore::harness
