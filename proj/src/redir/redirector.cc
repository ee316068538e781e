#include "petastore/redir/redirector.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <sstream>

#include "petastore/core/path.h"

namespace petastore::redir {
namespace {

constexpr double kGiB = 1024.0 * 1024 * 1024;
constexpr double kDay = 86400.0;

std::string err(ErrorCode code) { return "ERR " + std::string(to_string(code)); }

std::vector<std::string> split_words(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

bool parse_u64(const std::string& s, std::uint64_t* out) {
  if (s.empty() || s[0] == '-') return false;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0 || *end != '\0') return false;
  *out = v;
  return true;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view to_string(SlaveStatus s) {
  return s == SlaveStatus::kOnline ? "ONLINE" : "OFFLINE";
}

bool parse_slave_status(std::string_view text, SlaveStatus* out) {
  if (text == "ONLINE") {
    *out = SlaveStatus::kOnline;
  } else if (text == "OFFLINE") {
    *out = SlaveStatus::kOffline;
  } else {
    return false;
  }
  return true;
}

std::string_view to_string(Action::Kind k) {
  switch (k) {
    case Action::Kind::kStage:
      return "STAGE";
    case Action::Kind::kReplicate:
      return "REPLICATE";
    case Action::Kind::kPurge:
      return "PURGE";
  }
  return "?";
}

Status PolicyConfig::validate() const {
  auto bad = [](const char* what) { return Status(Error(ErrorCode::kInvalidArgument, what)); };
  if (!(0 < low_pct && low_pct < high_pct && high_pct <= 100)) return bad("watermarks");
  if (!(purge_idle_days > 0)) return bad("purge_idle_days");
  if (w_conn < 0 || w_files < 0 || w_rate < 0 || w_conn + w_files + w_rate <= 0) {
    return bad("weights");
  }
  if (!(conn_scale > 0 && files_scale > 0 && rate_scale > 0)) return bad("scales");
  if (replicate_threshold < 0 || hot_load_threshold < 0) return bad("thresholds");
  if (max_replicas < 1) return bad("max_replicas");
  if (access_window.count() <= 0 || liveness_window.count() <= 0) return bad("windows");
  if (copy_base.count() < 0 || copy_seconds_per_gib < 0) return bad("copy latency");
  return Status::OK();
}

Result<PolicyConfig> PolicyConfig::parse(std::string_view text) {
  PolicyConfig p;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) return Error(ErrorCode::kMalformed, "expected key=value: " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    char* end = nullptr;
    const double v = std::strtod(val.c_str(), &end);
    if (val.empty() || *end != '\0' || !std::isfinite(v)) {
      return Error(ErrorCode::kMalformed, "bad number for " + key);
    }
    if (key == "w_conn") {
      p.w_conn = v;
    } else if (key == "w_files") {
      p.w_files = v;
    } else if (key == "w_rate") {
      p.w_rate = v;
    } else if (key == "conn_scale") {
      p.conn_scale = v;
    } else if (key == "files_scale") {
      p.files_scale = v;
    } else if (key == "rate_scale") {
      p.rate_scale = v;
    } else if (key == "replicate_threshold") {
      p.replicate_threshold = v;
    } else if (key == "access_window_s") {
      p.access_window = seconds(v);
    } else if (key == "hot_load_threshold") {
      p.hot_load_threshold = v;
    } else if (key == "max_replicas") {
      if (v < 1 || v != std::floor(v)) return Error(ErrorCode::kMalformed, "max_replicas");
      p.max_replicas = static_cast<std::size_t>(v);
    } else if (key == "purge_idle_days") {
      p.purge_idle_days = v;
    } else if (key == "high_pct") {
      p.high_pct = v;
    } else if (key == "low_pct") {
      p.low_pct = v;
    } else if (key == "liveness_window_s") {
      p.liveness_window = seconds(v);
    } else if (key == "copy_base_s") {
      p.copy_base = seconds(v);
    } else if (key == "copy_seconds_per_gib") {
      p.copy_seconds_per_gib = v;
    } else {
      return Error(ErrorCode::kMalformed, "unknown policy key " + key);
    }
  }
  PETASTORE_RETURN_IF_ERROR(p.validate());
  return p;
}

std::string PolicyConfig::to_text() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "w_conn=" << w_conn << "\nw_files=" << w_files << "\nw_rate=" << w_rate
      << "\nconn_scale=" << conn_scale << "\nfiles_scale=" << files_scale
      << "\nrate_scale=" << rate_scale << "\nreplicate_threshold=" << replicate_threshold
      << "\naccess_window_s=" << to_seconds(access_window)
      << "\nhot_load_threshold=" << hot_load_threshold << "\nmax_replicas=" << max_replicas
      << "\npurge_idle_days=" << purge_idle_days << "\nhigh_pct=" << high_pct
      << "\nlow_pct=" << low_pct << "\nliveness_window_s=" << to_seconds(liveness_window)
      << "\ncopy_base_s=" << to_seconds(copy_base)
      << "\ncopy_seconds_per_gib=" << copy_seconds_per_gib << "\n";
  return out.str();
}

Master::Master(std::string name, const Clock& clock, PolicyConfig policy,
               const storage::TertiaryStore* tertiary)
    : name_(std::move(name)), clock_(clock), policy_(policy), tertiary_(tertiary) {}

Status Master::register_slave(const SlaveId& id, const std::string& address,
                              std::uint64_t disk_capacity) {
  std::lock_guard lk(mu_);
  if (id.empty() || address.empty()) return Error(ErrorCode::kInvalidArgument, "slave id/address");
  if (slaves_.count(id)) return Error(ErrorCode::kInvalidArgument, "slave already registered");
  Slave s;
  s.info.id = id;
  s.info.address = address;
  s.info.disk_capacity = disk_capacity;
  s.info.last_report = clock_.now();
  slaves_.emplace(id, std::move(s));
  return Status::OK();
}

Status Master::register_file(const std::string& path, FileId file, std::uint64_t bytes) {
  PETASTORE_RETURN_IF_ERROR(split_path(path));
  std::lock_guard lk(mu_);
  if (paths_.count(path)) return Error(ErrorCode::kDuplicatePath, path);
  auto [it, fresh] = files_.try_emplace(file);
  if (!fresh && it->second.bytes != bytes) {
    return Error(ErrorCode::kInvalidArgument, "file size disagrees with earlier registration");
  }
  it->second.bytes = bytes;
  paths_.emplace(path, file);
  return Status::OK();
}

Status Master::place_file(const SlaveId& slave, FileId file) {
  std::lock_guard lk(mu_);
  auto s = slaves_.find(slave);
  if (s == slaves_.end()) return Error(ErrorCode::kUnknownSlave, slave);
  auto f = files_.find(file);
  if (f == files_.end()) return Error(ErrorCode::kNotFound, "unregistered file");
  if (s->second.info.resident.count(file)) return Status::OK();
  if (free_locked(s->second) < f->second.bytes) {
    return Error(ErrorCode::kInvalidArgument, "slave disk full");
  }
  s->second.info.resident.insert(file);
  s->second.info.disk_used += f->second.bytes;
  s->second.resident_since[file] = clock_.now();
  return Status::OK();
}

double Master::normalized(const SlaveLoad& l) const {
  const double c = std::min(1.0, static_cast<double>(l.active_connections) / policy_.conn_scale);
  const double f = std::min(1.0, static_cast<double>(l.open_files) / policy_.files_scale);
  const double r = std::min(1.0, l.bytes_rate / policy_.rate_scale);
  return (policy_.w_conn * c + policy_.w_files * f + policy_.w_rate * r) /
         (policy_.w_conn + policy_.w_files + policy_.w_rate);
}

bool Master::usable_locked(const Slave& s) const {
  return s.info.status() == SlaveStatus::kOnline;
}

std::uint64_t Master::free_locked(const Slave& s) const {
  const std::uint64_t taken = s.info.disk_used + s.info.disk_reserved;
  return taken >= s.info.disk_capacity ? 0 : s.info.disk_capacity - taken;
}

bool Master::in_tertiary_locked(FileId file) const {
  return tertiary_ != nullptr && tertiary_->contains(file);
}

std::size_t Master::online_holders_locked(FileId file) const {
  std::size_t n = 0;
  for (const auto& [id, s] : slaves_) n += usable_locked(s) && s.info.resident.count(file);
  return n;
}

std::size_t Master::open_reads_locked(FileId file, const SlaveId& slave) const {
  auto it = open_count_.find({file, slave});
  return it == open_count_.end() ? 0 : it->second;
}

void Master::trace_locked(SimTime at, std::string_view event, FileId file, const SlaveId& slave,
                          std::string detail) {
  if (sink_) sink_(TraceRow{at, std::string(event), file, slave, std::move(detail)});
}

void Master::cancel_transfers_to_locked(const SlaveId& id) {
  for (auto* table : {&staging_, &replicating_}) {
    for (auto it = table->begin(); it != table->end();) {
      if (it->second.to == id || it->second.from == id) {
        auto target = slaves_.find(it->second.to);
        target->second.info.disk_reserved -= files_[it->first].bytes;
        trace_locked(clock_.now(), "TRANSFER_CANCELLED", it->first, it->second.to);
        it = table->erase(it);
      } else {
        ++it;
      }
    }
  }
  std::erase_if(pending_actions_, [&](const Action& a) {
    return a.kind != Action::Kind::kPurge && (a.to == id || a.from == id);
  });
}

void Master::refresh_liveness_locked(SimTime now) {
  for (auto& [id, s] : slaves_) {
    const bool alive = now - s.info.last_report <= policy_.liveness_window;
    if (alive == s.info.alive) continue;
    s.info.alive = alive;
    trace_locked(now, alive ? "SLAVE_ALIVE" : "SLAVE_STALE", 0, id);
    if (!alive) cancel_transfers_to_locked(id);
  }
}

void Master::settle_locked(SimTime now) {
  for (auto* table : {&staging_, &replicating_}) {
    for (auto it = table->begin(); it != table->end();) {
      if (it->second.ready_at > now) {
        ++it;
        continue;
      }
      auto& target = slaves_.at(it->second.to);
      const std::uint64_t bytes = files_[it->first].bytes;
      target.info.disk_reserved -= bytes;
      if (target.info.resident.insert(it->first).second) target.info.disk_used += bytes;
      target.resident_since[it->first] = it->second.ready_at;
      trace_locked(it->second.ready_at, table == &staging_ ? "STAGED" : "REPLICATED", it->first,
                   it->second.to);
      it = table->erase(it);
    }
  }
}

void Master::prune_window_locked(FileState& f, SimTime now) const {
  while (!f.accesses.empty() && f.accesses.front() < now - policy_.access_window) {
    f.accesses.pop_front();
  }
}

const Master::Slave* Master::pick_locked(std::vector<const Slave*> candidates, FileState& f) {
  if (candidates.empty()) return nullptr;
  double best = candidates.front()->info.normalized_load;
  for (const auto* s : candidates) best = std::min(best, s->info.normalized_load);
  std::erase_if(candidates, [&](const Slave* s) { return s->info.normalized_load > best + 1e-12; });
  return candidates[f.rr++ % candidates.size()];
}

Result<OpenReply> Master::open(const std::string& client, const std::string& path) {
  std::lock_guard lk(mu_);
  const SimTime now = clock_.now();
  settle_locked(now);
  refresh_liveness_locked(now);
  auto p = paths_.find(path);
  if (p == paths_.end()) return Error(ErrorCode::kNotFound, path);
  const FileId file = p->second;
  FileState& f = files_[file];
  f.accesses.push_back(now);
  f.last_access = now;
  prune_window_locked(f, now);

  std::vector<const Slave*> online, holders;
  bool offline_holder = false;
  for (const auto& [id, s] : slaves_) {
    const bool holds = s.info.resident.count(file) > 0;
    if (usable_locked(s)) {
      online.push_back(&s);
      if (holds) holders.push_back(&s);
    } else if (holds) {
      offline_holder = true;
    }
  }
  if (online.empty()) {
    trace_locked(now, "ERR", file, "", "NO_SLAVES");
    return Error(ErrorCode::kNoSlaves, "no slave online");
  }

  OpenReply reply;
  reply.file_id = file;
  if (const Slave* s = pick_locked(holders, f)) {
    reply.kind = OpenReply::Kind::kRedirect;
    reply.slave = s->info.id;
    reply.address = s->info.address;
    ++reads_[{client, file}][s->info.id];
    ++open_count_[{file, s->info.id}];
    trace_locked(now, "REDIRECT", file, s->info.id, client);
    return reply;
  }

  auto wait_for = [&](const Transfer& t) {
    const auto ms = std::chrono::ceil<std::chrono::milliseconds>(t.ready_at - now);
    reply.kind = OpenReply::Kind::kWait;
    reply.slave = t.to;
    reply.address = slaves_.at(t.to).info.address;
    reply.wait = std::max<SimDuration>(ms, std::chrono::milliseconds(1));
    trace_locked(now, "WAIT", file, t.to, std::to_string(to_us(reply.wait) / 1000) + "ms");
    return reply;
  };
  if (auto st = staging_.find(file); st != staging_.end()) return wait_for(st->second);

  if (!in_tertiary_locked(file)) {
    if (offline_holder) {
      trace_locked(now, "ERR", file, "", "UNAVAILABLE");
      return Error(ErrorCode::kUnavailable, "only copies are on offline slaves");
    }
    trace_locked(now, "ERR", file, "", "NOT_FOUND");
    return Error(ErrorCode::kNotFound, "no copy on any slave or in tertiary");
  }
  std::vector<const Slave*> roomy;
  for (const auto* s : online) {
    if (free_locked(*s) >= f.bytes) roomy.push_back(s);
  }
  const Slave* target = pick_locked(roomy, f);
  if (target == nullptr) {
    trace_locked(now, "ERR", file, "", "UNAVAILABLE");
    return Error(ErrorCode::kUnavailable, "no online slave has room to stage");
  }
  Transfer t{"", target->info.id, now, now + tertiary_->fetch_latency(f.bytes)};
  slaves_.at(t.to).info.disk_reserved += f.bytes;
  pending_actions_.push_back(
      Action{Action::Kind::kStage, file, "", t.to, f.bytes, t.issued_at, t.ready_at});
  trace_locked(now, "STAGE", file, t.to);
  auto& slot = staging_[file] = t;
  return wait_for(slot);
}

Status Master::close(const std::string& client, const std::string& path) {
  std::lock_guard lk(mu_);
  auto p = paths_.find(path);
  if (p == paths_.end()) return Error(ErrorCode::kNotFound, path);
  auto r = reads_.find({client, p->second});
  if (r == reads_.end()) return Error(ErrorCode::kNotHeld, "no open read for " + path);
  auto slave_it = r->second.begin();
  const SlaveId slave = slave_it->first;
  if (--slave_it->second == 0) r->second.erase(slave_it);
  if (r->second.empty()) reads_.erase(r);
  auto c = open_count_.find({p->second, slave});
  if (--c->second == 0) open_count_.erase(c);
  trace_locked(clock_.now(), "CLOSE", p->second, slave, client);
  return Status::OK();
}

Status Master::report_load(const SlaveId& id, const LoadReport& report) {
  std::lock_guard lk(mu_);
  auto it = slaves_.find(id);
  if (it == slaves_.end()) return Error(ErrorCode::kUnknownSlave, id);
  auto& info = it->second.info;
  if (report.at < info.last_report) {
    trace_locked(clock_.now(), "STALE_REPORT", 0, id, std::to_string(to_us(report.at)));
    return Status::OK();
  }
  info.load = report.load;
  info.normalized_load = normalized(report.load);
  info.last_report = report.at;
  refresh_liveness_locked(std::max(clock_.now(), report.at));
  return Status::OK();
}

Status Master::set_slave_status(const SlaveId& id, SlaveStatus status) {
  std::lock_guard lk(mu_);
  auto it = slaves_.find(id);
  if (it == slaves_.end()) return Error(ErrorCode::kUnknownSlave, id);
  if (it->second.info.admin_status == status) return Status::OK();
  it->second.info.admin_status = status;
  trace_locked(clock_.now(), status == SlaveStatus::kOnline ? "SLAVE_ONLINE" : "SLAVE_OFFLINE", 0,
               id);
  if (status == SlaveStatus::kOffline) cancel_transfers_to_locked(id);
  return Status::OK();
}

void Master::replicate_locked(SimTime now, std::vector<Action>* out) {
  for (auto& [file, f] : files_) {
    prune_window_locked(f, now);
    if (static_cast<double>(f.accesses.size()) < policy_.replicate_threshold) continue;
    if (f.accesses.empty() || replicating_.count(file) || staging_.count(file)) continue;
    std::vector<const Slave*> holders, others;
    for (const auto& [id, s] : slaves_) {
      if (!usable_locked(s)) continue;
      if (s.info.resident.count(file)) {
        holders.push_back(&s);
      } else if (free_locked(s) >= f.bytes) {
        others.push_back(&s);
      }
    }
    if (holders.empty() || holders.size() >= policy_.max_replicas || others.empty()) continue;
    const Slave* best = *std::min_element(holders.begin(), holders.end(), [](auto* a, auto* b) {
      return a->info.normalized_load < b->info.normalized_load;
    });
    if (best->info.normalized_load < policy_.hot_load_threshold) continue;
    const Slave* to = pick_locked(others, f);
    const SimDuration copy =
        policy_.copy_base + seconds(static_cast<double>(f.bytes) / kGiB * policy_.copy_seconds_per_gib);
    Transfer t{best->info.id, to->info.id, now, now + copy};
    slaves_.at(t.to).info.disk_reserved += f.bytes;
    replicating_[file] = t;
    out->push_back(
        Action{Action::Kind::kReplicate, file, t.from, t.to, f.bytes, t.issued_at, t.ready_at});
    trace_locked(now, "REPLICATE", file, t.to, "from " + t.from);
  }
}

void Master::purge_locked(SimTime now, std::vector<Action>* out) {
  for (auto& [id, s] : slaves_) {
    if (!usable_locked(s)) continue;
    const double cap = static_cast<double>(s.info.disk_capacity);
    if (static_cast<double>(s.info.disk_used) <= cap * policy_.high_pct / 100) continue;
    // Least recently used first. Files idle beyond the threshold have the
    // oldest use times, so they lead the order before the plain LRU tail.
    std::vector<std::pair<SimTime, FileId>> order;
    for (FileId file : s.info.resident) {
      SimTime used = s.resident_since[file];
      if (const auto& la = files_[file].last_access; la && *la > used) used = *la;
      order.emplace_back(used, file);
    }
    std::sort(order.begin(), order.end());
    for (const auto& [used, file] : order) {
      if (static_cast<double>(s.info.disk_used) <= cap * policy_.low_pct / 100) break;
      if (open_reads_locked(file, id) > 0) continue;
      if (!in_tertiary_locked(file) && online_holders_locked(file) < 2) continue;
      auto rep = replicating_.find(file);
      if (rep != replicating_.end() && rep->second.from == id) continue;
      const std::uint64_t bytes = files_[file].bytes;
      s.info.resident.erase(file);
      s.resident_since.erase(file);
      s.info.disk_used -= bytes;
      out->push_back(Action{Action::Kind::kPurge, file, "", id, bytes, now, now});
      const double idle_days = to_seconds(now - used) / kDay;
      trace_locked(now, "PURGE", file, id,
                   idle_days > policy_.purge_idle_days ? "idle" : "lru");
    }
  }
}

std::vector<Action> Master::tick(SimTime now) {
  std::lock_guard lk(mu_);
  settle_locked(now);
  refresh_liveness_locked(now);
  std::vector<Action> out = std::move(pending_actions_);
  pending_actions_.clear();
  replicate_locked(now, &out);
  purge_locked(now, &out);
  return out;
}

Result<OpenReply> Master::resolve(const std::string& client, const std::string& path,
                                  std::vector<std::string>* hops) {
  if (hops) hops->push_back(name_);
  return open(client, path);
}

Result<SlaveInfo> Master::slave(const SlaveId& id) const {
  std::lock_guard lk(mu_);
  auto it = slaves_.find(id);
  if (it == slaves_.end()) return Error(ErrorCode::kUnknownSlave, id);
  return it->second.info;
}

std::vector<SlaveInfo> Master::slaves() const {
  std::lock_guard lk(mu_);
  std::vector<SlaveInfo> out;
  for (const auto& [id, s] : slaves_) out.push_back(s.info);
  return out;
}

std::vector<SlaveId> Master::holders(FileId file) const {
  std::lock_guard lk(mu_);
  std::vector<SlaveId> out;
  for (const auto& [id, s] : slaves_) {
    if (s.info.resident.count(file)) out.push_back(id);
  }
  return out;
}

std::optional<FileId> Master::file_of(const std::string& path) const {
  std::lock_guard lk(mu_);
  auto it = paths_.find(path);
  if (it == paths_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Master::file_size(FileId file) const {
  std::lock_guard lk(mu_);
  auto it = files_.find(file);
  return it == files_.end() ? 0 : it->second.bytes;
}

std::size_t Master::access_count(FileId file) const {
  std::lock_guard lk(mu_);
  auto it = files_.find(file);
  return it == files_.end() ? 0 : it->second.accesses.size();
}

std::size_t Master::open_reads(FileId file, const SlaveId& slave) const {
  std::lock_guard lk(mu_);
  return open_reads_locked(file, slave);
}

bool Master::in_tertiary(FileId file) const {
  std::lock_guard lk(mu_);
  return in_tertiary_locked(file);
}

Status Master::check_invariants() const {
  std::lock_guard lk(mu_);
  for (const auto& [id, s] : slaves_) {
    std::uint64_t sum = 0;
    for (FileId f : s.info.resident) sum += files_.at(f).bytes;
    if (sum != s.info.disk_used) {
      return Error(ErrorCode::kInvalidArgument, id + ": disk_used differs from resident sizes");
    }
    if (s.info.disk_used + s.info.disk_reserved > s.info.disk_capacity) {
      return Error(ErrorCode::kInvalidArgument, id + ": over capacity");
    }
  }
  return Status::OK();
}

void Master::set_trace_sink(std::function<void(const TraceRow&)> sink) {
  std::lock_guard lk(mu_);
  sink_ = std::move(sink);
}

Status SuperMaster::add_child(const std::string& prefix, Redirector& child) {
  PETASTORE_RETURN_IF_ERROR(split_path(prefix));
  if (!children_.emplace(prefix, &child).second) return Error(ErrorCode::kDuplicatePath, prefix);
  return Status::OK();
}

Redirector* SuperMaster::owner(const std::string& path) const {
  Redirector* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& [prefix, child] : children_) {
    if (path_has_prefix(path, prefix) && (best == nullptr || prefix.size() > best_len)) {
      best = child;
      best_len = prefix.size();
    }
  }
  return best;
}

Result<OpenReply> SuperMaster::resolve(const std::string& client, const std::string& path,
                                       std::vector<std::string>* hops) {
  if (hops) hops->push_back(name_);
  Redirector* child = owner(path);
  if (child == nullptr) return Error(ErrorCode::kNotFound, "no child master owns " + path);
  return child->resolve(client, path, hops);
}

Status SuperMaster::close(const std::string& client, const std::string& path) {
  Redirector* child = owner(path);
  if (child == nullptr) return Error(ErrorCode::kNotFound, "no child master owns " + path);
  return child->close(client, path);
}

std::string RedirectorProtocol::handle(std::string_view line) {
  const auto w = split_words(line);
  if (w.size() != 2) return err(ErrorCode::kMalformed);
  if (w[0] == "OPEN") {
    auto r = root_.resolve(client_, w[1], nullptr);
    if (!r.ok()) return err(r.code());
    if (r->redirect()) return "GO " + r->address;
    return "WAIT " + std::to_string(to_us(r->wait) / 1000);
  }
  if (w[0] == "CLOSE") {
    auto st = root_.close(client_, w[1]);
    return st.ok() ? "OK" : err(st.code());
  }
  return err(ErrorCode::kMalformed);
}

SlaveProtocol::Reply SlaveProtocol::handle(std::string_view line) {
  const auto w = split_words(line);
  std::uint64_t id = 0, off = 0, len = 0;
  if (w.size() != 4 || w[0] != "READ" || !parse_u64(w[1], &id) || !parse_u64(w[2], &off) ||
      !parse_u64(w[3], &len)) {
    return {err(ErrorCode::kMalformed), {}};
  }
  auto fs = engine_.read_blocks(id, off, len);
  if (!fs.ok()) return {err(fs.code()), {}};
  Bytes payload = storage::encode_frame_set(*fs);
  return {"DATA " + std::to_string(payload.size()), std::move(payload)};
}

Result<OpenReply> parse_open_reply(std::string_view line) {
  const auto w = split_words(line);
  if (w.size() != 2) return Error(ErrorCode::kMalformed, std::string(line));
  OpenReply r;
  if (w[0] == "GO") {
    r.kind = OpenReply::Kind::kRedirect;
    r.address = w[1];
    return r;
  }
  if (w[0] == "WAIT") {
    std::uint64_t ms = 0;
    if (!parse_u64(w[1], &ms)) return Error(ErrorCode::kMalformed, std::string(line));
    r.kind = OpenReply::Kind::kWait;
    r.wait = std::chrono::milliseconds(ms);
    return r;
  }
  if (w[0] == "ERR") {
    ErrorCode code;
    if (!parse_error_code(w[1], &code)) return Error(ErrorCode::kMalformed, std::string(line));
    return Error(code, "remote");
  }
  return Error(ErrorCode::kMalformed, std::string(line));
}

std::string trace_tsv(const std::vector<TraceRow>& rows) {
  std::string out = "time_us\tevent\tfile\tslave\tdetail\n";
  for (const auto& r : rows) {
    out += std::to_string(to_us(r.at)) + '\t' + r.event + '\t' + std::to_string(r.file) + '\t' +
           r.slave + '\t' + r.detail + '\n';
  }
  return out;
}

}  // namespace petastore::redir
