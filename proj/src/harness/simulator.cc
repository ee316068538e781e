#include "petastore/harness/simulator.h"

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <tuple>

#include "petastore/harness/corpus.h"
#include "petastore/harness/rng.h"
#include "petastore/locks/lock_service.h"
#include "petastore/redir/redirector.h"
#include "petastore/storage/storage_engine.h"

namespace petastore::harness {
namespace {

// Same-instant ordering: faults, then servers, then clients.
constexpr int kFaultPrio = 0;
constexpr int kServicePrio = 1;
constexpr int kClientPrio = 2;

constexpr std::uint64_t kMiB = 1024 * 1024;
// Open retries on WAIT before a read gives up.
constexpr int kMaxWaits = 100;
// Simulated time allowed after the nominal duration for the drain.
constexpr double kDrainCapS = 3600;

using Args = std::vector<std::pair<std::string, std::string>>;

std::string str(std::int64_t v) { return std::to_string(v); }
std::string str(std::uint64_t v) { return std::to_string(v); }
std::string str(int v) { return std::to_string(v); }

struct FileInfo {
  std::string path;
  int run = 0;
  int stream = 0;
  int master = 0;
  storage::FileId id = 0;
};

struct Handle {
  std::uint64_t open_id = 0;  // 0 when no open is outstanding
  bool connected = false;
  int slave = -1;
  int waits = 0;
};

enum class ClientState { kIdle, kThinking, kWaitingLock, kInJob, kCrashed };

struct Job {
  int run = 0;
  int skim = 0;
  std::uint64_t start = 0;
  int next = 0;
  int attempts = 0;
  std::string last_error;
  locks::LockMode mode = locks::LockMode::kRead;
  std::string resource;
  bool locked = false;
};

struct Client {
  Client(std::string name, std::uint64_t seed) : id(std::move(name)), rng(seed) {}

  std::string id;
  Rng rng;
  ClientState state = ClientState::kIdle;
  // Bumped whenever scheduled continuations must be dropped.
  std::uint64_t gen = 0;
  bool connected = false;
  Job job;
  std::map<int, Handle> handles;  // by stream
  std::uint64_t next_open = 1;
  SimTime crashed_at;
  bool session_gone = false;
};

struct SlaveRt {
  std::string id;
  std::string address;
  int master = 0;
  bool admin_online = true;
  std::uint64_t bytes_since_report = 0;
  std::map<storage::FileId, int> conns;  // open client connections per file
};

class Simulation {
 public:
  explicit Simulation(const Scenario& s)
      : s_(s), net_rng_(mix_seed(s.seed, 0x6e6574)), zipf_(total_skims(), s.hot_spot_zipf_s) {}

  Status setup();
  void run();
  std::vector<TraceEvent> take_trace() { return std::move(trace_); }

 private:
  std::size_t total_skims() const {
    return static_cast<std::size_t>(s_.runs_in_parallel) * static_cast<std::size_t>(s_.skims_per_run);
  }
  SimTime now() const { return clock_.now(); }
  SimDuration deadline() const { return seconds(s_.heartbeat_s) * s_.deadline_intervals; }

  void at(SimTime t, int prio, std::function<void()> fn) {
    queue_.emplace(Key{to_us(t), prio, seq_++}, std::move(fn));
  }
  void at_client(SimTime t, int i, void (Simulation::*fn)(int)) {
    const std::uint64_t gen = clients_[i].gen;
    at(t, kClientPrio, [this, i, gen, fn] {
      if (clients_[i].gen == gen && clients_[i].state != ClientState::kCrashed) (this->*fn)(i);
    });
  }
  void emit(SimTime t, std::string actor, std::string event, Args args = {}) {
    trace_.push_back(TraceEvent{to_us(t), std::move(actor), std::move(event), std::move(args)});
  }
  void emit(std::string actor, std::string event, Args args = {}) {
    emit(now(), std::move(actor), std::move(event), std::move(args));
  }

  // Topology.
  Status build_masters(bool rebuild);
  void make_lock_service();
  bool serving(int slave) const { return power_on_ && slaves_[slave].admin_online; }
  int slave_by_address(const std::string& addr) const;
  int slave_by_id(const std::string& id) const;
  const FileInfo& file(int run, int stream) const {
    return files_[static_cast<std::size_t>(run * s_.streams_per_run + stream)];
  }
  void on_master_row(const std::string& master, const redir::TraceRow& row);
  void on_lock_event(const locks::LockEvent& e);

  // Periodic services.
  void heartbeat(int i);
  void reap();
  void report(int slave);
  void report_now(int slave);
  void tick(int master);
  void apply(const redir::Action& a);

  // Clients.
  void connect(Client& c);
  void start_job(int i);
  void lock_granted(int i);
  void step(int i);
  void open(int i, int stream);
  void read(int i, int stream, std::uint64_t event);
  void read_done(int i, bool ok, const std::string& reason);
  void finish_job(int i, const std::string& status);
  void schedule_next_job(int i, SimDuration delay);
  void conn_open(Client& c, int stream, Handle& h);
  void drop_handle(Client& c, int stream, Handle& h, const std::string& end_status);
  std::uint64_t event_of(const Job& j, int n) const;

  // Faults.
  void fault(const Fault& f);
  void crash(int i);
  void power_off(double downtime_s);
  void power_on();

  bool quiescent() const;

  using Key = std::tuple<std::int64_t, int, std::uint64_t>;

  const Scenario& s_;
  ManualClock clock_;
  storage::TertiaryStore tertiary_;
  std::vector<std::unique_ptr<storage::StorageEngine>> engines_;
  std::vector<SlaveRt> slaves_;
  std::vector<FileInfo> files_;
  std::map<storage::FileId, std::size_t> file_index_;
  std::vector<std::unique_ptr<redir::Master>> masters_;
  std::unique_ptr<redir::SuperMaster> top_;
  redir::Redirector* root_ = nullptr;
  std::unique_ptr<locks::LockService> locks_;
  std::vector<Client> clients_;

  std::map<Key, std::function<void()>> queue_;
  std::uint64_t seq_ = 0;
  std::vector<TraceEvent> trace_;
  Rng net_rng_;
  ZipfSampler zipf_;
  bool power_on_ = true;
  double loss_pct_ = 0;
  int pending_faults_ = 0;
};

Status Simulation::setup() {
  const int S = s_.streams_per_run;
  emit("harness", "SCENARIO",
       {{"seed", str(s_.seed)},
        {"masters", str(s_.n_masters)},
        {"slaves", str(s_.n_slaves)},
        {"clients", str(s_.n_clients)},
        {"runs", str(s_.runs_in_parallel)},
        {"streams", str(S)},
        {"duration_us", str(to_us(seconds(s_.duration_s)))}});
  for (int i = 0; i < s_.n_slaves; ++i) {
    SlaveRt sl;
    sl.id = "s" + str(i);
    sl.address = sl.id + ":1094";
    sl.master = i % s_.n_masters;
    slaves_.push_back(sl);
    engines_.push_back(
        std::make_unique<storage::StorageEngine>(sl.id, tertiary_, clock_, s_.block_size));
    emit("harness", "SLAVE",
         {{"slave", sl.id},
          {"address", sl.address},
          {"master", "m" + str(sl.master)},
          {"capacity", str(s_.slave_capacity_mib * kMiB)}});
  }

  // Stream k of run r holds the run's events e with e % S == k, in order.
  std::vector<std::size_t> rr(static_cast<std::size_t>(s_.n_masters), 0);
  for (int r = 0; r < s_.runs_in_parallel; ++r) {
    const int m = r % s_.n_masters;
    std::vector<int> owned;
    for (int i = m; i < s_.n_slaves; i += s_.n_masters) owned.push_back(i);
    for (int k = 0; k < S; ++k) {
      Bytes contents;
      for (int e = k; e < s_.events_per_run; e += S) {
        Bytes rec = synthetic_events(s_.seed, static_cast<std::uint32_t>(r),
                                     static_cast<std::uint64_t>(e), 1);
        contents.insert(contents.end(), rec.begin(), rec.end());
      }
      const int slave = owned[rr[static_cast<std::size_t>(m)]++ % owned.size()];
      auto put = engines_[static_cast<std::size_t>(slave)]->put_file(
          contents, static_cast<std::uint8_t>(storage::CodecId::kReferenceLz));
      if (!put.ok()) return put.error();
      FileInfo f{"/run" + str(r) + "/stream" + str(k), r, k, m, (*put)->file_id};
      file_index_[f.id] = files_.size();
      files_.push_back(f);
      emit("harness", "PUT",
           {{"file", str(f.id)},
            {"path", f.path},
            {"slave", slaves_[static_cast<std::size_t>(slave)].id},
            {"logical", str((*put)->logical_size())},
            {"physical", str((*put)->physical_size())},
            {"tertiary", tertiary_.contains(f.id) ? "1" : "0"}});
    }
  }
  PETASTORE_RETURN_IF_ERROR(build_masters(false));
  make_lock_service();

  for (int i = 0; i < s_.n_clients; ++i) {
    clients_.emplace_back("c" + str(i), mix_seed(s_.seed, 1000 + static_cast<std::uint64_t>(i)));
  }
  for (int i = 0; i < s_.n_clients; ++i) {
    Client& c = clients_[static_cast<std::size_t>(i)];
    connect(c);
    const SimDuration hb_offset =
        seconds(s_.heartbeat_s * static_cast<double>(i) / static_cast<double>(s_.n_clients));
    at(kSimEpoch + hb_offset, kServicePrio, [this, i] { heartbeat(i); });
    schedule_next_job(i, seconds(s_.think_time_s * c.rng.unit()));
  }
  for (int i = 0; i < s_.n_slaves; ++i) {
    const SimDuration off =
        seconds(s_.report_interval_s * static_cast<double>(i) / static_cast<double>(s_.n_slaves));
    at(kSimEpoch + off, kServicePrio, [this, i] { report(i); });
  }
  for (int m = 0; m < s_.n_masters; ++m) {
    at(kSimEpoch + seconds(s_.tick_interval_s), kServicePrio, [this, m] { tick(m); });
  }
  for (const auto& f : s_.faults) {
    ++pending_faults_;
    at(kSimEpoch + seconds(f.at_s), kFaultPrio, [this, f] {
      --pending_faults_;
      fault(f);
    });
  }
  return Status::OK();
}

Status Simulation::build_masters(bool rebuild) {
  top_.reset();
  masters_.clear();
  for (int m = 0; m < s_.n_masters; ++m) {
    const std::string name = "m" + str(m);
    auto master = std::make_unique<redir::Master>(name, clock_, s_.policy, &tertiary_);
    master->set_trace_sink([this, name](const redir::TraceRow& row) { on_master_row(name, row); });
    masters_.push_back(std::move(master));
  }
  for (const auto& sl : slaves_) {
    PETASTORE_RETURN_IF_ERROR(masters_[static_cast<std::size_t>(sl.master)]->register_slave(
        sl.id, sl.address, s_.slave_capacity_mib * kMiB));
  }
  for (const auto& f : files_) {
    auto stored = tertiary_.get(f.id);
    PETASTORE_RETURN_IF_ERROR(masters_[static_cast<std::size_t>(f.master)]->register_file(
        f.path, f.id, stored->physical_size()));
  }
  if (rebuild) emit("harness", "REBUILD");
  for (std::size_t i = 0; i < slaves_.size(); ++i) {
    for (storage::FileId id : engines_[i]->resident_files()) {
      const FileInfo& f = files_[file_index_.at(id)];
      if (f.master != slaves_[i].master) continue;
      auto st = masters_[static_cast<std::size_t>(f.master)]->place_file(slaves_[i].id, id);
      if (!st.ok()) {
        if (!rebuild) return Error(ErrorCode::kInvalidScenario, "slave capacity too small");
        continue;
      }
      emit("harness", "PLACE", {{"file", str(id)}, {"slave", slaves_[i].id}});
    }
  }
  if (rebuild) {
    for (const auto& sl : slaves_) {
      if (!sl.admin_online) {
        (void)masters_[static_cast<std::size_t>(sl.master)]->set_slave_status(
            sl.id, redir::SlaveStatus::kOffline);
      }
    }
  }
  if (s_.n_masters == 1) {
    root_ = masters_[0].get();
  } else {
    top_ = std::make_unique<redir::SuperMaster>("top");
    for (int r = 0; r < s_.runs_in_parallel; ++r) {
      PETASTORE_RETURN_IF_ERROR(top_->add_child(
          "/run" + str(r), *masters_[static_cast<std::size_t>(r % s_.n_masters)]));
    }
    root_ = top_.get();
  }
  return Status::OK();
}

void Simulation::make_lock_service() {
  locks::LockServiceConfig cfg;
  cfg.max_connections = s_.lock_max_connections;
  cfg.heartbeat_interval = seconds(s_.heartbeat_s);
  cfg.deadline_intervals = s_.deadline_intervals;
  locks_ = std::make_unique<locks::LockService>(clock_, cfg);
  locks_->set_event_sink([this](const locks::LockEvent& e) { on_lock_event(e); });
}

int Simulation::slave_by_address(const std::string& addr) const {
  for (std::size_t i = 0; i < slaves_.size(); ++i) {
    if (slaves_[i].address == addr) return static_cast<int>(i);
  }
  return -1;
}

int Simulation::slave_by_id(const std::string& id) const {
  for (std::size_t i = 0; i < slaves_.size(); ++i) {
    if (slaves_[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

void Simulation::on_master_row(const std::string& master, const redir::TraceRow& row) {
  Args a;
  if (row.file != 0) a.emplace_back("file", str(row.file));
  if (!row.slave.empty()) a.emplace_back("slave", row.slave);
  std::string detail = row.detail;
  std::string key = "detail";
  if (row.event == "REDIRECT" || row.event == "CLOSE") {
    key = "client";
  } else if (row.event == "WAIT") {
    key = "wait_ms";
    if (detail.size() > 2) detail.resize(detail.size() - 2);
  } else if (row.event == "REPLICATE") {
    key = "from";
    if (detail.rfind("from ", 0) == 0) detail = detail.substr(5);
  } else if (row.event == "PURGE") {
    key = "reason";
  } else if (row.event == "ERR") {
    key = "code";
  } else if (row.event == "STALE_REPORT") {
    key = "report_us";
  }
  for (char& ch : detail) {
    if (ch == ' ' || ch == '\t') ch = '_';
  }
  if (!detail.empty()) a.emplace_back(key, detail);
  emit(row.at, master, row.event, std::move(a));
}

void Simulation::on_lock_event(const locks::LockEvent& e) {
  emit(e.at, "locks", std::string(to_string(e.kind)),
       {{"resource", e.resource}, {"client", e.client}, {"mode", std::string(to_string(e.mode))}});
  if (e.kind != locks::LockEvent::Kind::kGrant) return;
  const int i = std::stoi(e.client.substr(1));
  Client& c = clients_[static_cast<std::size_t>(i)];
  if (c.state == ClientState::kWaitingLock && c.job.resource == e.resource) {
    at_client(now(), i, &Simulation::lock_granted);
  }
}

// ---------------------------------------------------------------- services

void Simulation::heartbeat(int i) {
  Client& c = clients_[static_cast<std::size_t>(i)];
  if (c.state == ClientState::kCrashed) return;
  if (power_on_ && c.connected && locks_->heartbeat(c.id, now()).ok()) {
    at(now() + deadline() + SimDuration(1), kServicePrio, [this] { reap(); });
  }
  at(now() + seconds(s_.heartbeat_s), kServicePrio, [this, i] { heartbeat(i); });
}

void Simulation::reap() {
  if (!power_on_) return;
  for (const auto& entry : locks_->reap_orphans(now())) {
    const int i = std::stoi(entry.holder.substr(1));
    const Client& c = clients_[static_cast<std::size_t>(i)];
    const bool crashed = c.state == ClientState::kCrashed;
    emit("locks", "REAP",
         {{"client", entry.holder},
          {"resource", entry.resource},
          {"mode", std::string(to_string(entry.mode))},
          {"crashed_at_us", crashed ? str(to_us(c.crashed_at)) : "-1"},
          {"latency_us", crashed ? str(to_us(now() - c.crashed_at)) : "-1"}});
  }
  for (auto& c : clients_) {
    if (c.state != ClientState::kCrashed || c.session_gone || locks_->has_session(c.id)) continue;
    c.session_gone = true;
    emit("locks", "SESSION_REAPED",
         {{"client", c.id}, {"latency_us", str(to_us(now() - c.crashed_at))}});
    // Servers drop the dead client's connections along with its session.
    for (auto& [k, h] : c.handles) drop_handle(c, k, h, "");
    c.handles.clear();
  }
}

void Simulation::report_now(int i) {
  SlaveRt& sl = slaves_[static_cast<std::size_t>(i)];
  redir::LoadReport rep;
  rep.at = now();
  for (const auto& [file, n] : sl.conns) {
    rep.load.active_connections += static_cast<std::uint64_t>(n);
    ++rep.load.open_files;
  }
  rep.load.bytes_rate = static_cast<double>(sl.bytes_since_report) / s_.report_interval_s;
  sl.bytes_since_report = 0;
  (void)masters_[static_cast<std::size_t>(sl.master)]->report_load(sl.id, rep);
}

void Simulation::report(int i) {
  if (serving(i)) report_now(i);
  at(now() + seconds(s_.report_interval_s), kServicePrio, [this, i] { report(i); });
}

void Simulation::tick(int m) {
  if (power_on_) {
    for (const auto& a : masters_[static_cast<std::size_t>(m)]->tick(now())) apply(a);
  }
  at(now() + seconds(s_.tick_interval_s), kServicePrio, [this, m] { tick(m); });
}

void Simulation::apply(const redir::Action& a) {
  const int to = slave_by_id(a.to);
  Args args{{"kind", std::string(redir::to_string(a.kind))}, {"file", str(a.file)}};
  bool ok = false;
  switch (a.kind) {
    case redir::Action::Kind::kStage: {
      auto st = engines_[static_cast<std::size_t>(to)]->fetch_from_tertiary(a.file, a.issued_at);
      ok = st.ok();
      if (ok) args.emplace_back("ready_us", str(to_us(st->completion)));
      break;
    }
    case redir::Action::Kind::kReplicate: {
      const int from = slave_by_id(a.from);
      args.emplace_back("from", a.from);
      auto src = engines_[static_cast<std::size_t>(from)]->resident(a.file);
      if (src) {
        engines_[static_cast<std::size_t>(to)]->install(src);
        ok = true;
      }
      break;
    }
    case redir::Action::Kind::kPurge:
      ok = engines_[static_cast<std::size_t>(to)]->evict(a.file);
      break;
  }
  args.emplace_back("to", a.to);
  args.emplace_back("ok", ok ? "1" : "0");
  emit("harness", "APPLY", std::move(args));
}

// ----------------------------------------------------------------- clients

void Simulation::connect(Client& c) {
  auto st = locks_->connect(c.id);
  c.connected = st.ok();
  emit(c.id, "CONNECT", {{"result", st.ok() ? "OK" : std::string(to_string(st.code()))}});
}

void Simulation::schedule_next_job(int i, SimDuration delay) {
  Client& c = clients_[static_cast<std::size_t>(i)];
  c.state = ClientState::kThinking;
  at_client(now() + delay, i, &Simulation::start_job);
}

std::uint64_t Simulation::event_of(const Job& j, int n) const {
  // Skims select a fixed stride through the run, so every job spans all streams.
  const auto per_run = static_cast<std::uint64_t>(s_.events_per_run);
  return (static_cast<std::uint64_t>(j.skim) * 7919 +
          (j.start + static_cast<std::uint64_t>(n)) * 131) %
         per_run;
}

void Simulation::start_job(int i) {
  Client& c = clients_[static_cast<std::size_t>(i)];
  if (now() >= kSimEpoch + seconds(s_.duration_s)) {
    c.state = ClientState::kIdle;
    return;
  }
  const auto epoch = static_cast<std::uint64_t>(to_seconds(now() - kSimEpoch) / s_.hot_spot_epoch_s);
  const std::size_t shift = mix_seed(s_.seed, 0x686f74 + epoch) % total_skims();
  const std::size_t item = (zipf_.sample(c.rng) + shift) % total_skims();
  Job j;
  j.run = static_cast<int>(item / static_cast<std::size_t>(s_.skims_per_run));
  j.skim = static_cast<int>(item % static_cast<std::size_t>(s_.skims_per_run));
  j.mode = c.rng.chance(s_.write_fraction) ? locks::LockMode::kUpdate : locks::LockMode::kRead;
  j.start = c.rng.uniform(static_cast<std::uint64_t>(s_.events_per_run));
  j.resource = "/run" + str(j.run);
  c.job = j;
  emit(c.id, "JOB_START",
       {{"run", str(j.run)}, {"skim", str(j.skim)}, {"mode", std::string(to_string(j.mode))}});

  auto fail = [&](const std::string& code) {
    emit(c.id, "LOCK_REQ", {{"resource", j.resource}, {"result", code}});
    read_done(i, false, code);
    emit(c.id, "JOB_END", {{"status", "ERR"}});
    schedule_next_job(i, seconds(s_.request_timeout_s));
  };
  if (!power_on_) return fail("UNAVAILABLE");
  if (!c.connected) connect(c);
  if (!c.connected) return fail("REJECTED_AT_CAPACITY");
  auto r = locks_->acquire(c.id, j.resource, j.mode);
  if (!r.ok()) return fail(std::string(to_string(r.code())));
  if (r->granted()) {
    emit(c.id, "LOCK_REQ", {{"resource", j.resource}, {"result", "GRANT"}});
    c.job.locked = true;
    c.state = ClientState::kInJob;
    at_client(now(), i, &Simulation::step);
  } else {
    emit(c.id, "LOCK_REQ",
         {{"resource", j.resource}, {"result", "QUEUE"}, {"position", str(r->queue_position)}});
    c.state = ClientState::kWaitingLock;
  }
}

void Simulation::lock_granted(int i) {
  Client& c = clients_[static_cast<std::size_t>(i)];
  if (c.state != ClientState::kWaitingLock) return;
  emit(c.id, "LOCK_GRANTED", {{"resource", c.job.resource}});
  c.job.locked = true;
  c.state = ClientState::kInJob;
  step(i);
}

void Simulation::step(int i) {
  Client& c = clients_[static_cast<std::size_t>(i)];
  if (c.job.next >= s_.events_per_job) return finish_job(i, "DONE");
  if (c.job.attempts > s_.max_retries) return read_done(i, false, c.job.last_error);
  const std::uint64_t e = event_of(c.job, c.job.next);
  const int k = static_cast<int>(e % static_cast<std::uint64_t>(s_.streams_per_run));
  Handle& h = c.handles[k];
  if (!h.connected) return open(i, k);
  read(i, k, e);
}

void Simulation::open(int i, int k) {
  Client& c = clients_[static_cast<std::size_t>(i)];
  Handle& h = c.handles[k];
  const FileInfo& f = file(c.job.run, k);
  if (h.open_id == 0) {
    h.open_id = c.next_open++;
    h.waits = 0;
    emit(c.id, "OPEN", {{"id", str(h.open_id)}, {"path", f.path}, {"file", str(f.id)}});
  }
  redir::RedirectorProtocol proto(*root_, c.id);
  const std::string line = proto.handle("OPEN " + f.path);
  auto reply = redir::parse_open_reply(line);
  if (!reply.ok()) {
    const std::string code(to_string(reply.code()));
    emit(c.id, "OPEN_REPLY", {{"id", str(h.open_id)}, {"reply", "ERR"}, {"code", code}});
    emit(c.id, "OPEN_END", {{"id", str(h.open_id)}, {"status", "ERR"}});
    h = Handle{};
    c.job.last_error = code;
    return read_done(i, false, code);
  }
  if (!reply->redirect()) {
    emit(c.id, "OPEN_REPLY",
         {{"id", str(h.open_id)}, {"reply", "WAIT"}, {"wait_ms", str(to_us(reply->wait) / 1000)}});
    if (++h.waits > kMaxWaits) {
      emit(c.id, "OPEN_END", {{"id", str(h.open_id)}, {"status", "ERR"}});
      h = Handle{};
      return read_done(i, false, "WAIT_LIMIT");
    }
    at_client(now() + reply->wait, i, &Simulation::step);
    return;
  }
  const int slave = slave_by_address(reply->address);
  emit(c.id, "OPEN_REPLY",
       {{"id", str(h.open_id)}, {"reply", "GO"}, {"slave", slaves_[static_cast<std::size_t>(slave)].id}});
  h.slave = slave;
  conn_open(c, k, h);
  at_client(now() + seconds(s_.open_latency_ms / 1000.0), i, &Simulation::step);
}

void Simulation::conn_open(Client& c, int k, Handle& h) {
  const FileInfo& f = file(c.job.run, k);
  h.connected = true;
  ++slaves_[static_cast<std::size_t>(h.slave)].conns[f.id];
  emit(c.id, "CONN_OPEN", {{"slave", slaves_[static_cast<std::size_t>(h.slave)].id}, {"file", str(f.id)}});
}

void Simulation::drop_handle(Client& c, int k, Handle& h, const std::string& end_status) {
  const FileInfo& f = file(c.job.run, k);
  if (h.connected) {
    SlaveRt& sl = slaves_[static_cast<std::size_t>(h.slave)];
    if (--sl.conns[f.id] <= 0) sl.conns.erase(f.id);
    emit(c.id, "CONN_CLOSE", {{"slave", sl.id}, {"file", str(f.id)}});
    if (power_on_) {
      redir::RedirectorProtocol proto(*root_, c.id);
      (void)proto.handle("CLOSE " + f.path);
    }
  }
  if (h.open_id != 0 && !end_status.empty()) {
    emit(c.id, "OPEN_END", {{"id", str(h.open_id)}, {"status", end_status}});
  }
  h = Handle{};
}

void Simulation::read(int i, int k, std::uint64_t e) {
  Client& c = clients_[static_cast<std::size_t>(i)];
  Handle& h = c.handles[k];
  const FileInfo& f = file(c.job.run, k);
  const std::uint64_t S = static_cast<std::uint64_t>(s_.streams_per_run);
  const std::uint64_t off = (e / S) * kEventRecordBytes;
  const std::uint64_t len = kEventRecordBytes;
  const int si = h.slave;
  ++c.job.attempts;
  auto row = [&](const std::string& result) {
    emit(c.id, "READ",
         {{"slave", slaves_[static_cast<std::size_t>(si)].id},
          {"file", str(f.id)},
          {"event", str(e)},
          {"first_block", str(off / s_.block_size)},
          {"last_block", str((off + len - 1) / s_.block_size)},
          {"attempt", str(c.job.attempts)},
          {"result", result}});
  };
  if (!serving(si)) {
    row("CONN_LOST");
    c.job.last_error = "CONN_LOST";
    drop_handle(c, k, h, "ERR");
    at_client(now(), i, &Simulation::step);
    return;
  }
  if (loss_pct_ > 0 && net_rng_.unit() * 100.0 < loss_pct_) {
    row("TIMEOUT");
    c.job.last_error = "TIMEOUT";
    at_client(now() + seconds(s_.request_timeout_s), i, &Simulation::step);
    return;
  }
  redir::SlaveProtocol proto(*engines_[static_cast<std::size_t>(si)]);
  auto reply = proto.handle("READ " + str(f.id) + " " + str(off) + " " + str(len));
  if (reply.header.rfind("ERR ", 0) == 0) {
    const std::string code = reply.header.substr(4);
    row(code);
    c.job.last_error = code;
    drop_handle(c, k, h, "ERR");
    at_client(now(), i, &Simulation::step);
    return;
  }
  slaves_[static_cast<std::size_t>(si)].bytes_since_report += reply.payload.size();
  auto frames = storage::decode_frame_set(reply.payload);
  Result<Bytes> data = frames.ok() ? storage::client_decompress(*frames, off, len)
                                   : Result<Bytes>(frames.error());
  if (!data.ok()) {
    const std::string code(to_string(data.code()));
    row(code);
    return read_done(i, false, code);
  }
  const Bytes expect = synthetic_events(s_.seed, static_cast<std::uint32_t>(c.job.run), e, 1);
  if (*data != expect) {
    row("WRONG_DATA");
    return read_done(i, false, "WRONG_DATA");
  }
  row("OK");
  read_done(i, true, "");
}

void Simulation::read_done(int i, bool ok, const std::string& reason) {
  Client& c = clients_[static_cast<std::size_t>(i)];
  Args a{{"ok", ok ? "1" : "0"}};
  if (!ok) a.emplace_back("reason", reason.empty() ? "UNKNOWN" : reason);
  emit(c.id, "READ_RESULT", std::move(a));
  if (c.state != ClientState::kInJob) return;
  ++c.job.next;
  c.job.attempts = 0;
  c.job.last_error.clear();
  at_client(now() + seconds(s_.read_interval_ms / 1000.0), i, &Simulation::step);
}

void Simulation::finish_job(int i, const std::string& status) {
  Client& c = clients_[static_cast<std::size_t>(i)];
  for (auto& [k, h] : c.handles) drop_handle(c, k, h, h.connected ? "DONE" : "ERR");
  c.handles.clear();
  if (c.job.locked && power_on_) {
    auto st = locks_->release(c.id, c.job.resource);
    emit(c.id, "UNLOCK",
         {{"resource", c.job.resource}, {"result", st.ok() ? "OK" : std::string(to_string(st.code()))}});
  }
  c.job.locked = false;
  emit(c.id, "JOB_END", {{"status", status}});
  schedule_next_job(i, seconds(s_.think_time_s * (0.5 + c.rng.unit())));
}

// ------------------------------------------------------------------ faults

void Simulation::fault(const Fault& f) {
  Args a{{"kind", std::string(to_string(f.kind))}, {"target", f.target}};
  for (std::size_t n = 0; n < f.args.size(); ++n) a.emplace_back("arg" + str(static_cast<int>(n)), f.args[n]);
  switch (f.kind) {
    case FaultKind::kClientCrash: {
      int victim = -1;
      if (f.target == "@update-holder") {
        if (power_on_) {
          for (const auto& l : locks_->all_locks()) {
            if (l.mode != locks::LockMode::kUpdate) continue;
            const int i = std::stoi(l.holder.substr(1));
            if (clients_[static_cast<std::size_t>(i)].state == ClientState::kCrashed) continue;
            if (victim < 0 || i < victim) victim = i;
          }
        }
      } else {
        victim = std::stoi(f.target.substr(1));
        if (clients_[static_cast<std::size_t>(victim)].state == ClientState::kCrashed) victim = -1;
      }
      a.emplace_back("applied", victim >= 0 ? "1" : "0");
      if (victim >= 0) a.emplace_back("client", clients_[static_cast<std::size_t>(victim)].id);
      emit("harness", "FAULT", std::move(a));
      if (victim >= 0) crash(victim);
      return;
    }
    case FaultKind::kSlaveOffline: {
      const int si = std::stoi(f.target.substr(1));
      SlaveRt& sl = slaves_[static_cast<std::size_t>(si)];
      a.emplace_back("applied", sl.admin_online ? "1" : "0");
      emit("harness", "FAULT", std::move(a));
      if (!sl.admin_online) return;
      sl.admin_online = false;
      emit("harness", "SLAVE_DOWN", {{"slave", sl.id}});
      if (power_on_) {
        (void)masters_[static_cast<std::size_t>(sl.master)]->set_slave_status(
            sl.id, redir::SlaveStatus::kOffline);
      }
      if (!f.args.empty()) {
        ++pending_faults_;
        at(now() + seconds(std::stod(f.args[0])), kFaultPrio, [this, si] {
          --pending_faults_;
          SlaveRt& s = slaves_[static_cast<std::size_t>(si)];
          s.admin_online = true;
          emit("harness", "SLAVE_UP", {{"slave", s.id}});
          if (power_on_) {
            (void)masters_[static_cast<std::size_t>(s.master)]->set_slave_status(
                s.id, redir::SlaveStatus::kOnline);
            report_now(si);
          }
        });
      }
      return;
    }
    case FaultKind::kPowerOutage: {
      a.emplace_back("applied", power_on_ ? "1" : "0");
      emit("harness", "FAULT", std::move(a));
      if (power_on_) power_off(f.args.empty() ? s_.outage_s : std::stod(f.args[0]));
      return;
    }
    case FaultKind::kPacketLoss:
      loss_pct_ = std::stod(f.args[0]);
      a.emplace_back("applied", "1");
      emit("harness", "FAULT", std::move(a));
      emit("harness", "PACKET_LOSS", {{"pct", f.args[0]}});
      return;
    case FaultKind::kTornWrite: {
      const int si = std::stoi(f.target.substr(1));
      const auto block = static_cast<std::uint32_t>(std::stoul(f.args[1]));
      storage::FileId id = 0;
      for (const auto& fi : files_) {
        if (fi.path == f.args[0]) id = fi.id;
      }
      auto& engine = *engines_[static_cast<std::size_t>(si)];
      auto resident = engine.resident(id);
      const bool applied = resident && block < resident->meta.block_count();
      if (applied) engine.inject_torn_write(id, block);
      a.emplace_back("applied", applied ? "1" : "0");
      emit("harness", "FAULT", std::move(a));
      emit("harness", "TORN_WRITE",
           {{"slave", slaves_[static_cast<std::size_t>(si)].id},
            {"file", str(id)},
            {"block", str(static_cast<std::uint64_t>(block))},
            {"applied", applied ? "1" : "0"}});
      return;
    }
  }
}

void Simulation::crash(int i) {
  Client& c = clients_[static_cast<std::size_t>(i)];
  int held = 0, update_held = 0;
  if (power_on_) {
    for (const auto& l : locks_->all_locks()) {
      if (l.holder != c.id) continue;
      ++held;
      update_held += l.mode == locks::LockMode::kUpdate;
    }
  }
  emit(c.id, "CRASH", {{"held", str(held)}, {"update_held", str(update_held)}});
  // Opens end here; the connections stay up until the servers notice.
  for (auto& [k, h] : c.handles) {
    if (h.open_id != 0) emit(c.id, "OPEN_END", {{"id", str(h.open_id)}, {"status", "CRASH"}});
    h.open_id = 0;
  }
  c.state = ClientState::kCrashed;
  c.crashed_at = now();
  ++c.gen;
  if (!power_on_) c.session_gone = true;
}

void Simulation::power_off(double downtime_s) {
  // Handle teardown below must not reach the masters.
  power_on_ = false;
  for (std::size_t i = 0; i < clients_.size(); ++i) {
    Client& c = clients_[i];
    if (c.state == ClientState::kCrashed) {
      for (auto& [k, h] : c.handles) drop_handle(c, k, h, "");
      c.handles.clear();
      c.session_gone = true;
      continue;
    }
    if (c.state != ClientState::kInJob && c.state != ClientState::kWaitingLock) continue;
    const bool reading = c.state == ClientState::kInJob;
    for (auto& [k, h] : c.handles) drop_handle(c, k, h, "ERR");
    c.handles.clear();
    if (reading) read_done(static_cast<int>(i), false, "POWER");
    c.job.locked = false;
    emit(c.id, "JOB_END", {{"status", "ABORTED"}});
    ++c.gen;
    schedule_next_job(static_cast<int>(i), seconds(s_.request_timeout_s));
  }
  for (auto& sl : slaves_) sl.conns.clear();
  emit("harness", "POWER_OFF", {{"downtime_us", str(to_us(seconds(downtime_s)))}});
  locks_.reset();
  for (auto& c : clients_) c.connected = false;
  ++pending_faults_;
  at(now() + seconds(downtime_s), kFaultPrio, [this] {
    --pending_faults_;
    power_on();
  });
}

void Simulation::power_on() {
  power_on_ = true;
  emit("harness", "POWER_ON");
  make_lock_service();
  (void)build_masters(true);
  for (int i = 0; i < s_.n_slaves; ++i) {
    if (serving(i)) report_now(i);
  }
  for (auto& c : clients_) {
    if (c.state != ClientState::kCrashed) connect(c);
  }
}

bool Simulation::quiescent() const {
  if (now() < kSimEpoch + seconds(s_.duration_s) || pending_faults_ > 0 || !power_on_) return false;
  for (const auto& c : clients_) {
    if (c.state == ClientState::kCrashed) {
      if (!c.session_gone) return false;
    } else if (c.state != ClientState::kIdle) {
      return false;
    }
  }
  return true;
}

void Simulation::run() {
  const std::int64_t cap = to_us(kSimEpoch + seconds(s_.duration_s + kDrainCapS));
  bool reached = false;
  while (!queue_.empty()) {
    auto it = queue_.begin();
    const std::int64_t t = std::get<0>(it->first);
    if (t > cap) break;
    clock_.set(sim_time_from_us(t));
    auto fn = std::move(it->second);
    queue_.erase(it);
    fn();
    if (quiescent()) {
      reached = true;
      break;
    }
  }
  std::size_t live = 0;
  for (const auto& c : clients_) live += c.state != ClientState::kCrashed;
  std::size_t queued = 0;
  std::int64_t sessions = -1;
  if (locks_) {
    for (int r = 0; r < s_.runs_in_parallel; ++r) queued += locks_->queue_length("/run" + str(r));
    sessions = static_cast<std::int64_t>(locks_->session_count());
  }
  emit("harness", "QUIESCENT",
       {{"reached", reached ? "1" : "0"},
        {"sessions", str(sessions)},
        {"live", str(static_cast<std::uint64_t>(live))},
        {"queued", str(static_cast<std::uint64_t>(queued))}});
}

}  // namespace

Result<RunResult> run_scenario(const Scenario& scenario) {
  if (auto st = scenario.validate(); !st.ok()) {
    if (st.code() == ErrorCode::kUnknownTarget) return st.error();
    return Error(ErrorCode::kInvalidScenario, st.error().message());
  }
  Simulation sim(scenario);
  PETASTORE_RETURN_IF_ERROR(sim.setup());
  sim.run();
  RunResult out;
  out.trace = sim.take_trace();
  out.trace_text = format_trace(out.trace);
  out.report = compute_report(out.trace);
  return out;
}

}  // namespace petastore::harness
