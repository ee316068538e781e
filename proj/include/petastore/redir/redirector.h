#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "petastore/core/result.h"
#include "petastore/core/time.h"
#include "petastore/storage/storage_engine.h"

namespace petastore::redir {

using SlaveId = std::string;
using storage::FileId;

enum class SlaveStatus : std::uint8_t { kOnline, kOffline };

std::string_view to_string(SlaveStatus s);
bool parse_slave_status(std::string_view text, SlaveStatus* out);

struct SlaveLoad {
  std::uint64_t active_connections = 0;
  std::uint64_t open_files = 0;
  double bytes_rate = 0;  // bytes per second
};

struct LoadReport {
  SimTime at;
  SlaveLoad load;
};

struct PolicyConfig {
  double w_conn = 0.5;
  double w_files = 0.2;
  double w_rate = 0.3;
  // Each load component is divided by its scale and clamped to 1.
  double conn_scale = 100;
  double files_scale = 100;
  double rate_scale = 100.0 * 1024 * 1024;

  double replicate_threshold = 50;  // accesses per window
  SimDuration access_window = seconds(3600);
  double hot_load_threshold = 0.7;
  std::size_t max_replicas = 3;
  double purge_idle_days = 3;
  double high_pct = 90;
  double low_pct = 70;
  // A slave with no report for this long is treated as offline.
  SimDuration liveness_window = seconds(30);
  // Peer-to-peer copy time = copy_base + size * copy_seconds_per_gib.
  SimDuration copy_base = seconds(0.1);
  double copy_seconds_per_gib = 1.0;

  Status validate() const;
  // key=value lines; '#' starts a comment. Unknown keys are errors.
  static Result<PolicyConfig> parse(std::string_view text);
  std::string to_text() const;
};

struct SlaveInfo {
  SlaveId id;
  std::string address;
  SlaveStatus admin_status = SlaveStatus::kOnline;
  bool alive = true;
  SlaveLoad load;
  double normalized_load = 0;
  std::uint64_t disk_used = 0;
  std::uint64_t disk_reserved = 0;
  std::uint64_t disk_capacity = 0;
  std::set<FileId> resident;
  SimTime last_report;

  SlaveStatus status() const {
    return admin_status == SlaveStatus::kOnline && alive ? SlaveStatus::kOnline
                                                         : SlaveStatus::kOffline;
  }
};

struct OpenReply {
  enum class Kind { kRedirect, kWait };
  Kind kind = Kind::kRedirect;
  FileId file_id = 0;
  SlaveId slave;        // redirect target, or the staging target when waiting
  std::string address;  // host:port of `slave`
  SimDuration wait{0};

  bool redirect() const { return kind == Kind::kRedirect; }
};

struct Action {
  enum class Kind { kStage, kReplicate, kPurge };
  Kind kind = Kind::kStage;
  FileId file = 0;
  SlaveId from;  // replication source
  SlaveId to;    // stage/replicate target, or the slave purged from
  std::uint64_t bytes = 0;
  SimTime issued_at;
  SimTime ready_at;

  bool operator==(const Action&) const = default;
};

std::string_view to_string(Action::Kind k);

struct TraceRow {
  SimTime at;
  std::string event;
  FileId file = 0;
  SlaveId slave;
  std::string detail;
};

// Anything that answers opens: a master, or a master of masters.
class Redirector {
 public:
  virtual ~Redirector() = default;
  virtual const std::string& name() const = 0;
  // Appends this node's name to `hops`, then answers or forwards.
  virtual Result<OpenReply> resolve(const std::string& client, const std::string& path,
                                    std::vector<std::string>* hops) = 0;
  virtual Status close(const std::string& client, const std::string& path) = 0;
};

// Master data server. Keeps its own view of which slave holds which file and
// decides redirects, staging, replication and purges from it. Actions are
// handed out by tick() for an executor to apply to the slaves.
//
// All decision state sits behind one mutex, so concurrent opens linearize.
class Master final : public Redirector {
 public:
  Master(std::string name, const Clock& clock, PolicyConfig policy = {},
         const storage::TertiaryStore* tertiary = nullptr);

  const std::string& name() const override { return name_; }
  const PolicyConfig& policy() const { return policy_; }

  Status register_slave(const SlaveId& id, const std::string& address,
                        std::uint64_t disk_capacity);
  // Maps a logical path to a file and its size on disk.
  Status register_file(const std::string& path, FileId file, std::uint64_t bytes);
  // Records a copy already sitting on a slave (initial placement).
  Status place_file(const SlaveId& slave, FileId file);

  // kNotFound: unknown path, or no copy on any slave nor in tertiary.
  // kNoSlaves: no slave is online. kUnavailable: the only copies sit on
  // offline slaves, or no online slave has room to stage.
  Result<OpenReply> open(const std::string& client, const std::string& path);
  // Ends the client's read of `path`; its copy becomes purgeable again.
  Status close(const std::string& client, const std::string& path) override;

  // Reports older than the last accepted one are ignored.
  Status report_load(const SlaveId& id, const LoadReport& report);
  Status set_slave_status(const SlaveId& id, SlaveStatus status);

  std::vector<Action> tick(SimTime now);

  Result<OpenReply> resolve(const std::string& client, const std::string& path,
                            std::vector<std::string>* hops) override;

  Result<SlaveInfo> slave(const SlaveId& id) const;
  std::vector<SlaveInfo> slaves() const;
  std::vector<SlaveId> holders(FileId file) const;
  std::optional<FileId> file_of(const std::string& path) const;
  std::uint64_t file_size(FileId file) const;
  std::size_t access_count(FileId file) const;
  std::size_t open_reads(FileId file, const SlaveId& slave) const;
  bool in_tertiary(FileId file) const;
  // Disk accounting and capacity on every slave.
  Status check_invariants() const;

  // Receives a row per decision while the master lock is held.
  void set_trace_sink(std::function<void(const TraceRow&)> sink);

 private:
  struct Slave {
    SlaveInfo info;
    std::map<FileId, SimTime> resident_since;
  };
  struct FileState {
    std::uint64_t bytes = 0;
    std::deque<SimTime> accesses;
    std::optional<SimTime> last_access;
    std::uint64_t rr = 0;
  };
  struct Transfer {
    SlaveId from;
    SlaveId to;
    SimTime issued_at;
    SimTime ready_at;
  };

  double normalized(const SlaveLoad& l) const;
  bool usable_locked(const Slave& s) const;
  void refresh_liveness_locked(SimTime now);
  void settle_locked(SimTime now);
  void cancel_transfers_to_locked(const SlaveId& id);
  void prune_window_locked(FileState& f, SimTime now) const;
  // Least-loaded candidate; equal loads rotate per file.
  const Slave* pick_locked(std::vector<const Slave*> candidates, FileState& f);
  std::uint64_t free_locked(const Slave& s) const;
  bool in_tertiary_locked(FileId file) const;
  std::size_t online_holders_locked(FileId file) const;
  std::size_t open_reads_locked(FileId file, const SlaveId& slave) const;
  void replicate_locked(SimTime now, std::vector<Action>* out);
  void purge_locked(SimTime now, std::vector<Action>* out);
  void trace_locked(SimTime at, std::string_view event, FileId file, const SlaveId& slave,
                    std::string detail = {});

  std::string name_;
  const Clock& clock_;
  PolicyConfig policy_;
  const storage::TertiaryStore* tertiary_;

  mutable std::mutex mu_;
  std::map<SlaveId, Slave> slaves_;
  std::map<std::string, FileId> paths_;
  std::map<FileId, FileState> files_;
  std::map<FileId, Transfer> staging_;
  std::map<FileId, Transfer> replicating_;
  std::vector<Action> pending_actions_;
  // (client, file) -> slave serving the open read, with a count per pair.
  std::map<std::pair<std::string, FileId>, std::map<SlaveId, std::size_t>> reads_;
  std::map<std::pair<FileId, SlaveId>, std::size_t> open_count_;
  std::function<void(const TraceRow&)> sink_;
};

// Master of masters: forwards each open to the child owning the longest
// matching path prefix.
class SuperMaster final : public Redirector {
 public:
  explicit SuperMaster(std::string name) : name_(std::move(name)) {}

  const std::string& name() const override { return name_; }
  Status add_child(const std::string& prefix, Redirector& child);
  Result<OpenReply> resolve(const std::string& client, const std::string& path,
                            std::vector<std::string>* hops) override;
  Status close(const std::string& client, const std::string& path) override;

 private:
  Redirector* owner(const std::string& path) const;

  std::string name_;
  std::map<std::string, Redirector*> children_;
};

// Client-to-master line protocol, one per connection:
//
//   OPEN <path>   -> GO <host:port> | WAIT <ms> | ERR <code>
//   CLOSE <path>  -> OK | ERR <code>
class RedirectorProtocol {
 public:
  RedirectorProtocol(Redirector& root, std::string client)
      : root_(root), client_(std::move(client)) {}

  std::string handle(std::string_view line);

 private:
  Redirector& root_;
  std::string client_;
};

// Client-to-slave protocol:
//
//   READ <file_id> <offset> <len> -> DATA <len>\n<len bytes> | ERR <code>
//
// The DATA payload is an encoded frame set; the client decompresses.
class SlaveProtocol {
 public:
  explicit SlaveProtocol(storage::StorageEngine& engine) : engine_(engine) {}

  struct Reply {
    std::string header;
    Bytes payload;
  };
  Reply handle(std::string_view line);

 private:
  storage::StorageEngine& engine_;
};

// Parses `GO <addr>` / `WAIT <ms>` / `ERR <code>` back into a reply.
Result<OpenReply> parse_open_reply(std::string_view line);

// Writes the trace as TSV: time_us, event, file, slave, detail.
std::string trace_tsv(const std::vector<TraceRow>& rows);

}  // namespace petastore::redir
