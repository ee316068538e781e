#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "petastore/harness/trace.h"

namespace petastore::harness {

struct Violations {
  std::uint64_t redirect = 0;      // REDIRECT to a slave not online or not holding the file
  std::uint64_t purge = 0;         // purge of an open-read or sole unarchived copy
  std::uint64_t conservation = 0;  // OPEN without exactly one terminal OPEN_END
  std::uint64_t lock_safety = 0;   // UPDATE holder sharing a resource
  std::uint64_t torn = 0;          // checksum outcome disagreeing with injected corruption

  std::uint64_t total() const { return redirect + purge + conservation + lock_safety + torn; }
};

struct MetricsReport {
  std::uint64_t reads_attempted = 0;
  std::uint64_t reads_ok = 0;
  std::uint64_t checksum_failures = 0;
  double availability = 1.0;

  std::uint64_t lock_requests = 0;
  std::uint64_t lock_collisions = 0;
  double lock_collision_rate = 0;
  // Queued requests of live clients that were never granted.
  std::uint64_t lock_waits_unresolved = 0;

  std::uint64_t open_connections_peak = 0;
  std::uint64_t open_files_peak = 0;
  std::map<std::string, std::uint64_t> redirect_histogram;

  std::uint64_t logical_bytes = 0;
  std::uint64_t physical_bytes = 0;
  double compression_ratio = 0;

  std::uint64_t staging_count = 0;
  std::uint64_t replicate_count = 0;
  std::uint64_t purge_count = 0;

  std::uint64_t crashed_clients = 0;
  std::uint64_t update_locks_held_at_crash = 0;
  std::uint64_t orphan_locks_reaped = 0;
  std::uint64_t orphan_update_locks_reaped = 0;
  std::int64_t max_reap_latency_us = 0;

  std::uint64_t opens = 0;
  std::uint64_t opens_done = 0;
  std::uint64_t opens_err = 0;
  std::uint64_t opens_crash = 0;

  // From the final quiescence line; -1 when the run never reached it.
  std::int64_t sessions_at_end = -1;
  std::int64_t live_clients_at_end = -1;
  std::int64_t lock_queue_at_end = -1;

  Violations violations;

  // Human-readable table followed by a key=value block.
  std::string to_text() const;
  std::string to_kv() const;
};

// Everything is derived from the trace alone.
MetricsReport compute_report(const std::vector<TraceEvent>& trace);
// Successful reads over attempted reads; 1.0 when nothing was attempted.
double compute_availability(const std::vector<TraceEvent>& trace);

}  // namespace petastore::harness
