#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "petastore/core/result.h"
#include "petastore/redir/redirector.h"

namespace petastore::harness {

enum class FaultKind : std::uint8_t {
  kClientCrash,
  kSlaveOffline,
  kPowerOutage,
  kPacketLoss,
  kTornWrite,
};

std::string_view to_string(FaultKind k);
bool parse_fault_kind(std::string_view text, FaultKind* out);

// Targets:
//   CLIENT_CRASH  c<i>, or @update-holder (lowest live client holding an
//                 UPDATE lock when the fault fires)
//   SLAVE_OFFLINE s<i> [restore_after_s]
//   POWER_OUTAGE  all [downtime_s]
//   PACKET_LOSS   network <pct>
//   TORN_WRITE    s<i> <path> <block>
struct Fault {
  double at_s = 0;
  FaultKind kind = FaultKind::kClientCrash;
  std::string target;
  std::vector<std::string> args;

  bool operator==(const Fault&) const = default;
};

struct Scenario {
  std::uint64_t seed = 1;
  double duration_s = 300;

  // Topology.
  int n_masters = 1;
  int n_slaves = 3;
  std::uint64_t slave_capacity_mib = 256;
  std::uint32_t block_size = 4096;

  // Workload.
  int n_clients = 20;
  int runs_in_parallel = 2;
  int streams_per_run = 4;
  int skims_per_run = 8;
  int events_per_run = 4000;
  int events_per_job = 40;
  double hot_spot_zipf_s = 1.1;
  double hot_spot_epoch_s = 120;
  double write_fraction = 0.05;
  double think_time_s = 4;
  double read_interval_ms = 25;
  double open_latency_ms = 1;

  // Services.
  std::size_t lock_max_connections = 1024;
  double heartbeat_s = 5;
  int deadline_intervals = 3;
  double report_interval_s = 5;
  double tick_interval_s = 1;
  double request_timeout_s = 1;
  int max_retries = 3;
  double outage_s = 60;

  redir::PolicyConfig policy;
  std::vector<Fault> faults;

  // kInvalidScenario for bad values, kUnknownTarget for fault targets that
  // do not exist in the topology.
  Status validate() const;
  // key=value lines, '#' comments. Policy keys take a "policy." prefix; each
  // `fault=<time_s> <KIND> <target> [args...]` line adds one fault.
  static Result<Scenario> parse(std::string_view text);
  std::string to_text() const;
};

}  // namespace petastore::harness
