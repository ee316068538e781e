#include "petastore/harness/scenario.h"

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <set>
#include <sstream>

#include "petastore/core/path.h"

namespace petastore::harness {
namespace {

Error invalid(const std::string& what) { return Error(ErrorCode::kInvalidScenario, what); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(std::move(w));
  return out;
}

bool to_double(const std::string& s, double* out) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || !std::isfinite(v)) return false;
  *out = v;
  return true;
}

bool to_index(const std::string& s, char prefix, int n, int* out) {
  if (s.size() < 2 || s[0] != prefix) return false;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  const long v = std::strtol(s.c_str() + 1, nullptr, 10);
  if (v < 0 || v >= n) return false;
  *out = static_cast<int>(v);
  return true;
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

}  // namespace

std::string_view to_string(FaultKind k) {
  switch (k) {
    case FaultKind::kClientCrash:
      return "CLIENT_CRASH";
    case FaultKind::kSlaveOffline:
      return "SLAVE_OFFLINE";
    case FaultKind::kPowerOutage:
      return "POWER_OUTAGE";
    case FaultKind::kPacketLoss:
      return "PACKET_LOSS";
    case FaultKind::kTornWrite:
      return "TORN_WRITE";
  }
  return "?";
}

bool parse_fault_kind(std::string_view text, FaultKind* out) {
  for (auto k : {FaultKind::kClientCrash, FaultKind::kSlaveOffline, FaultKind::kPowerOutage,
                 FaultKind::kPacketLoss, FaultKind::kTornWrite}) {
    if (text == to_string(k)) {
      *out = k;
      return true;
    }
  }
  return false;
}

Status Scenario::validate() const {
  if (!(duration_s > 0)) return invalid("duration_s must be positive");
  if (n_masters < 1 || n_slaves < n_masters) return invalid("need 1 <= n_masters <= n_slaves");
  if (slave_capacity_mib == 0) return invalid("slave_capacity_mib");
  if (block_size == 0) return invalid("block_size");
  if (n_clients < 1) return invalid("n_clients");
  if (runs_in_parallel < 1 || streams_per_run < 1 || skims_per_run < 1) {
    return invalid("runs/streams/skims must be positive");
  }
  if (events_per_run < streams_per_run) return invalid("events_per_run < streams_per_run");
  if (events_per_job < 1 || events_per_job > events_per_run) return invalid("events_per_job");
  if (!(hot_spot_zipf_s > 0) || !(hot_spot_epoch_s > 0)) return invalid("hot spot parameters");
  if (write_fraction < 0 || write_fraction > 1) return invalid("write_fraction");
  if (think_time_s < 0 || !(read_interval_ms > 0) || open_latency_ms < 0) {
    return invalid("timing parameters");
  }
  if (lock_max_connections < 1 || !(heartbeat_s > 0) || deadline_intervals < 1) {
    return invalid("lock service parameters");
  }
  if (!(report_interval_s > 0) || !(tick_interval_s > 0) || !(request_timeout_s > 0) ||
      max_retries < 1 || !(outage_s > 0)) {
    return invalid("service timing parameters");
  }
  if (auto st = policy.validate(); !st.ok()) return invalid("policy: " + st.error().message());
  for (const auto& f : faults) {
    auto bad_target = [&] { return Error(ErrorCode::kUnknownTarget, f.target); };
    if (f.at_s < 0 || f.at_s > duration_s) return invalid("fault time outside the run");
    int idx = 0;
    double v = 0;
    switch (f.kind) {
      case FaultKind::kClientCrash:
        if (f.target != "@update-holder" && !to_index(f.target, 'c', n_clients, &idx)) {
          return bad_target();
        }
        if (!f.args.empty()) return invalid("CLIENT_CRASH takes no arguments");
        break;
      case FaultKind::kSlaveOffline:
        if (!to_index(f.target, 's', n_slaves, &idx)) return bad_target();
        if (f.args.size() > 1 || (f.args.size() == 1 && (!to_double(f.args[0], &v) || v <= 0))) {
          return invalid("SLAVE_OFFLINE restore time");
        }
        break;
      case FaultKind::kPowerOutage:
        if (f.target != "all") return bad_target();
        if (f.args.size() > 1 || (f.args.size() == 1 && (!to_double(f.args[0], &v) || v <= 0))) {
          return invalid("POWER_OUTAGE downtime");
        }
        break;
      case FaultKind::kPacketLoss:
        if (f.target != "network") return bad_target();
        if (f.args.size() != 1 || !to_double(f.args[0], &v) || v < 0 || v > 100) {
          return invalid("PACKET_LOSS needs a percentage");
        }
        break;
      case FaultKind::kTornWrite: {
        if (!to_index(f.target, 's', n_slaves, &idx)) return bad_target();
        if (f.args.size() != 2) return invalid("TORN_WRITE needs <path> <block>");
        // Paths are /run<r>/stream<k>.
        auto segs = split_path(f.args[0]);
        int r = 0, k = 0;
        if (!segs.ok() || segs->size() != 2 || segs->at(0).rfind("run", 0) != 0 ||
            segs->at(1).rfind("stream", 0) != 0 ||
            !to_index("r" + segs->at(0).substr(3), 'r', runs_in_parallel, &r) ||
            !to_index("k" + segs->at(1).substr(6), 'k', streams_per_run, &k)) {
          return Error(ErrorCode::kUnknownTarget, f.args[0]);
        }
        if (!to_double(f.args[1], &v) || v < 0 || v != std::floor(v)) {
          return invalid("TORN_WRITE block");
        }
        break;
      }
    }
  }
  return Status::OK();
}

Result<Scenario> Scenario::parse(std::string_view text) {
  Scenario s;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      return invalid("line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    auto where = [&] { return "line " + std::to_string(line_no) + ": " + key; };
    if (key == "fault") {
      auto w = words(val);
      Fault f;
      if (w.size() < 3 || !to_double(w[0], &f.at_s) || !parse_fault_kind(w[1], &f.kind)) {
        return invalid(where() + " expects <time_s> <KIND> <target> [args]");
      }
      f.target = w[2];
      f.args.assign(w.begin() + 3, w.end());
      s.faults.push_back(std::move(f));
      continue;
    }
    if (key.rfind("policy.", 0) == 0) {
      auto p = redir::PolicyConfig::parse(s.policy.to_text() + key.substr(7) + "=" + val + "\n");
      if (!p.ok()) return invalid(where() + ": " + p.error().message());
      s.policy = *p;
      continue;
    }
    double v = 0;
    if (!to_double(val, &v)) return invalid(where() + " is not a number");
    auto as_int = [&](auto* field) -> Status {
      if (v != std::floor(v) || v < 0 || v > 1e12) return invalid(where() + " must be an integer");
      *field = static_cast<std::remove_pointer_t<decltype(field)>>(v);
      return Status::OK();
    };
    Status st;
    if (key == "seed") {
      // Seeds may exceed double precision; reparse as an integer.
      char* end = nullptr;
      s.seed = std::strtoull(val.c_str(), &end, 10);
      if (*end != '\0') return invalid(where());
    } else if (key == "duration_s") {
      s.duration_s = v;
    } else if (key == "n_masters") {
      st = as_int(&s.n_masters);
    } else if (key == "n_slaves") {
      st = as_int(&s.n_slaves);
    } else if (key == "slave_capacity_mib") {
      st = as_int(&s.slave_capacity_mib);
    } else if (key == "block_size") {
      st = as_int(&s.block_size);
    } else if (key == "n_clients") {
      st = as_int(&s.n_clients);
    } else if (key == "runs_in_parallel") {
      st = as_int(&s.runs_in_parallel);
    } else if (key == "streams_per_run") {
      st = as_int(&s.streams_per_run);
    } else if (key == "skims_per_run") {
      st = as_int(&s.skims_per_run);
    } else if (key == "events_per_run") {
      st = as_int(&s.events_per_run);
    } else if (key == "events_per_job") {
      st = as_int(&s.events_per_job);
    } else if (key == "hot_spot_zipf_s") {
      s.hot_spot_zipf_s = v;
    } else if (key == "hot_spot_epoch_s") {
      s.hot_spot_epoch_s = v;
    } else if (key == "write_fraction") {
      s.write_fraction = v;
    } else if (key == "think_time_s") {
      s.think_time_s = v;
    } else if (key == "read_interval_ms") {
      s.read_interval_ms = v;
    } else if (key == "open_latency_ms") {
      s.open_latency_ms = v;
    } else if (key == "lock_max_connections") {
      st = as_int(&s.lock_max_connections);
    } else if (key == "heartbeat_s") {
      s.heartbeat_s = v;
    } else if (key == "deadline_intervals") {
      st = as_int(&s.deadline_intervals);
    } else if (key == "report_interval_s") {
      s.report_interval_s = v;
    } else if (key == "tick_interval_s") {
      s.tick_interval_s = v;
    } else if (key == "request_timeout_s") {
      s.request_timeout_s = v;
    } else if (key == "max_retries") {
      st = as_int(&s.max_retries);
    } else if (key == "outage_s") {
      s.outage_s = v;
    } else {
      return invalid("unknown key " + key);
    }
    PETASTORE_RETURN_IF_ERROR(st);
  }
  PETASTORE_RETURN_IF_ERROR(s.validate());
  return s;
}

std::string Scenario::to_text() const {
  std::ostringstream o;
  o << "seed=" << seed << "\nduration_s=" << fmt(duration_s) << "\nn_masters=" << n_masters
    << "\nn_slaves=" << n_slaves << "\nslave_capacity_mib=" << slave_capacity_mib
    << "\nblock_size=" << block_size << "\nn_clients=" << n_clients
    << "\nruns_in_parallel=" << runs_in_parallel << "\nstreams_per_run=" << streams_per_run
    << "\nskims_per_run=" << skims_per_run << "\nevents_per_run=" << events_per_run
    << "\nevents_per_job=" << events_per_job << "\nhot_spot_zipf_s=" << fmt(hot_spot_zipf_s)
    << "\nhot_spot_epoch_s=" << fmt(hot_spot_epoch_s)
    << "\nwrite_fraction=" << fmt(write_fraction) << "\nthink_time_s=" << fmt(think_time_s)
    << "\nread_interval_ms=" << fmt(read_interval_ms)
    << "\nopen_latency_ms=" << fmt(open_latency_ms)
    << "\nlock_max_connections=" << lock_max_connections << "\nheartbeat_s=" << fmt(heartbeat_s)
    << "\ndeadline_intervals=" << deadline_intervals
    << "\nreport_interval_s=" << fmt(report_interval_s)
    << "\ntick_interval_s=" << fmt(tick_interval_s)
    << "\nrequest_timeout_s=" << fmt(request_timeout_s) << "\nmax_retries=" << max_retries
    << "\noutage_s=" << fmt(outage_s) << "\n";
  std::istringstream pol(policy.to_text());
  for (std::string l; std::getline(pol, l);) o << "policy." << l << "\n";
  for (const auto& f : faults) {
    o << "fault=" << fmt(f.at_s) << " " << to_string(f.kind) << " " << f.target;
    for (const auto& a : f.args) o << " " << a;
    o << "\n";
  }
  return o.str();
}

}  // namespace petastore::harness
