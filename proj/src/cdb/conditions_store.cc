#include "petastore/cdb/conditions_store.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include "petastore/core/path.h"
#include "petastore/storage/stored_file.h"

namespace petastore::cdb {

namespace {

constexpr std::size_t kSegmentBytes = 1 << 20;
constexpr std::size_t kRowBytes = 72;

bool clean_token(const std::string& s) {
  return !s.empty() && s.find_first_of("\t\n") == std::string::npos;
}

std::string payload_file_name(std::uint64_t file_id) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "payload-%06llu.pstf", static_cast<unsigned long long>(file_id));
  return buf;
}

}  // namespace

ConditionsStore::ConditionsStore(std::string origin_tag) : origin_tag_(std::move(origin_tag)) {}

ConditionsStore::~ConditionsStore() = default;

const std::string* ConditionsStore::intern(const std::string& s) {
  return &*strings_.insert(s).first;
}

PayloadRef ConditionsStore::put_payload(ByteSpan bytes) {
  std::unique_lock lk(mu_);
  return put_payload_locked(bytes);
}

PayloadRef ConditionsStore::put_payload_locked(ByteSpan bytes) {
  if (segments_.empty() || (segments_.back().size() + 4 + bytes.size() > kSegmentBytes &&
                            !segments_.back().empty())) {
    segments_.emplace_back();
  }
  Bytes& seg = segments_.back();
  PayloadRef ref{segments_.size(), seg.size()};
  ByteWriter w(&seg);
  w.u32(static_cast<std::uint32_t>(bytes.size()));
  w.raw(bytes);
  payload_bytes_ += bytes.size();
  return ref;
}

Result<Bytes> ConditionsStore::payload(PayloadRef ref) const {
  std::shared_lock lk(mu_);
  return payload_locked(ref);
}

Result<Bytes> ConditionsStore::payload_locked(PayloadRef ref) const {
  if (ref.file_id == 0 || ref.file_id > segments_.size()) {
    return Error(ErrorCode::kNotFound, "payload file " + std::to_string(ref.file_id));
  }
  const Bytes& seg = segments_[ref.file_id - 1];
  if (ref.offset > seg.size()) return Error(ErrorCode::kRange, "payload offset");
  ByteReader r(ByteSpan(seg).subspan(ref.offset));
  std::uint32_t n;
  ByteSpan body;
  if (!r.u32(&n) || !r.raw(n, &body)) return Error(ErrorCode::kMalformed, "payload framing");
  return Bytes(body.begin(), body.end());
}

std::uint64_t ConditionsStore::payload_bytes() const {
  std::shared_lock lk(mu_);
  return payload_bytes_;
}

Status ConditionsStore::validate(const IovRecord& rec) const {
  auto segs = split_path(rec.key.namespace_path);
  if (!segs.ok()) return segs.error();
  if (segs->empty()) return Error(ErrorCode::kInvalidArgument, "empty condition namespace");
  if (!clean_token(rec.key.condition_type)) {
    return Error(ErrorCode::kInvalidArgument, "bad condition type");
  }
  if (!clean_token(rec.revision)) return Error(ErrorCode::kInvalidArgument, "bad revision");
  if (!(rec.t_begin < rec.t_end)) {
    return Error(ErrorCode::kInvalidArgument, "validity interval must have t_begin < t_end");
  }
  return Status::OK();
}

std::uint64_t ConditionsStore::add_locked(IovRecord rec, bool defer,
                                          std::set<IntervalIndex*>* dirty) {
  rec.seq = records_.size() + 1;
  IndexEntry e;
  e.inserted_at = to_us(rec.inserted_at);
  e.origin_tag = intern(rec.origin_tag);
  e.origin_seq = rec.origin_seq;
  e.begin = rec.t_begin;
  e.end = rec.t_end;
  e.record = static_cast<std::uint32_t>(records_.size());
  identities_.insert({rec.origin_tag, rec.origin_seq});
  auto& index = indexes_[IndexKey{rec.key, rec.revision}];
  records_.push_back(std::move(rec));
  const bool in_order = index.size() == 0 || index.entries().back().before(e);
  if (dirty && dirty->count(&index)) {
    index.insert_deferred(e);
  } else if (in_order) {
    index.insert(e);
  } else if (defer && dirty) {
    index.insert_deferred(e);
    dirty->insert(&index);
  } else {
    index.insert(e);  // rebuilds
  }
  return records_.back().seq;
}

Result<std::uint64_t> ConditionsStore::insert(IovRecord rec) {
  PETASTORE_RETURN_IF_ERROR(validate(rec));
  std::unique_lock lk(mu_);
  if (any_local_insert_ && rec.inserted_at < last_local_insert_) {
    return Error(ErrorCode::kNonMonotoneInsertionTime,
                 std::to_string(to_us(rec.inserted_at)) + " < " +
                     std::to_string(to_us(last_local_insert_)));
  }
  rec.origin_tag = origin_tag_;
  rec.origin_seq = records_.size() + 1;
  last_local_insert_ = rec.inserted_at;
  any_local_insert_ = true;
  return add_locked(std::move(rec), false, nullptr);
}

Result<std::uint64_t> ConditionsStore::insert(const ConditionKey& key, DetectorTime t_begin,
                                              DetectorTime t_end, SimTime inserted_at,
                                              const std::string& revision, ByteSpan payload) {
  IovRecord rec;
  rec.key = key;
  rec.t_begin = t_begin;
  rec.t_end = t_end;
  rec.inserted_at = inserted_at;
  rec.revision = revision;
  PETASTORE_RETURN_IF_ERROR(validate(rec));
  std::unique_lock lk(mu_);
  if (any_local_insert_ && inserted_at < last_local_insert_) {
    return Error(ErrorCode::kNonMonotoneInsertionTime,
                 std::to_string(to_us(inserted_at)) + " < " +
                     std::to_string(to_us(last_local_insert_)));
  }
  rec.payload = put_payload_locked(payload);
  rec.origin_tag = origin_tag_;
  rec.origin_seq = records_.size() + 1;
  last_local_insert_ = inserted_at;
  any_local_insert_ = true;
  return add_locked(std::move(rec), false, nullptr);
}

Result<IovRecord> ConditionsStore::lookup_locked(const ConditionKey& key, DetectorTime t,
                                                 SimTime as_of,
                                                 const std::string& revision) const {
  auto it = indexes_.find(IndexKey{key, revision});
  if (it == indexes_.end()) return Error(ErrorCode::kNoMatch, key.to_string() + "@" + revision);
  auto hit = it->second.lookup(t, to_us(as_of));
  if (!hit) return Error(ErrorCode::kNoMatch, key.to_string() + " t=" + std::to_string(t));
  return records_[*hit];
}

Result<IovRecord> ConditionsStore::lookup_record(const ConditionKey& key, DetectorTime t,
                                                 SimTime as_of,
                                                 const std::string& revision) const {
  std::shared_lock lk(mu_);
  return lookup_locked(key, t, as_of, revision);
}

Result<PayloadRef> ConditionsStore::lookup(const ConditionKey& key, DetectorTime t, SimTime as_of,
                                           const std::string& revision) const {
  auto r = lookup_record(key, t, as_of, revision);
  if (!r.ok()) return r.error();
  return r->payload;
}

Status ConditionsStore::insert_config_locked(const ConfigurationRecord& cfg) {
  if (configs_.count(cfg.name)) return Error(ErrorCode::kDuplicateConfig, cfg.name);
  configs_[cfg.name] = cfg;
  return Status::OK();
}

Result<ConfigurationRecord> ConditionsStore::make_config(
    const std::string& name, const std::map<std::string, std::string>& bindings,
    SimTime insertion_cutoff) {
  if (!clean_token(name)) return Error(ErrorCode::kInvalidArgument, "bad configuration name");
  std::vector<RevisionBinding> sorted;
  for (const auto& [prefix, rev] : bindings) {
    auto segs = split_path(prefix);
    if (!segs.ok()) return segs.error();
    if (!clean_token(rev)) return Error(ErrorCode::kInvalidArgument, "bad revision for " + prefix);
    sorted.push_back({prefix, rev});
  }
  auto state = compute_state_id(name, insertion_cutoff, sorted);
  if (!state.ok()) return state.error();
  ConfigurationRecord cfg{name, bindings, insertion_cutoff, *state};
  std::unique_lock lk(mu_);
  PETASTORE_RETURN_IF_ERROR(insert_config_locked(cfg));
  return cfg;
}

Result<ConfigurationRecord> ConditionsStore::config(const std::string& name) const {
  std::shared_lock lk(mu_);
  auto it = configs_.find(name);
  if (it == configs_.end()) return Error(ErrorCode::kUnknownConfig, name);
  return it->second;
}

std::vector<ConfigurationRecord> ConditionsStore::configs() const {
  std::shared_lock lk(mu_);
  std::vector<ConfigurationRecord> out;
  for (const auto& [n, c] : configs_) out.push_back(c);
  return out;
}

Result<std::string> ConditionsStore::bound_revision_locked(const ConfigurationRecord& cfg,
                                                           const ConditionKey& key) const {
  const std::string* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& [prefix, rev] : cfg.bindings) {
    if (path_has_prefix(key.namespace_path, prefix) && (!best || prefix.size() > best_len)) {
      best = &rev;
      best_len = prefix.size();
    }
  }
  if (!best) return Error(ErrorCode::kUnboundPrefix, key.namespace_path);
  return *best;
}

Result<IovRecord> ConditionsStore::lookup_config_record(const ConditionKey& key, DetectorTime t,
                                                        const std::string& config_name) const {
  std::shared_lock lk(mu_);
  auto it = configs_.find(config_name);
  if (it == configs_.end()) return Error(ErrorCode::kUnknownConfig, config_name);
  auto rev = bound_revision_locked(it->second, key);
  if (!rev.ok()) return rev.error();
  return lookup_locked(key, t, it->second.insertion_cutoff, *rev);
}

Result<PayloadRef> ConditionsStore::lookup_config(const ConditionKey& key, DetectorTime t,
                                                  const std::string& config_name) const {
  auto r = lookup_config_record(key, t, config_name);
  if (!r.ok()) return r.error();
  return r->payload;
}

std::uint64_t ConditionsStore::sweep(const ConditionsStore& source, ConditionsStore& target) {
  if (&source == &target) return 0;
  // Lock in address order so opposite sweeps cannot deadlock.
  std::shared_lock src_lk(source.mu_, std::defer_lock);
  std::unique_lock dst_lk(target.mu_, std::defer_lock);
  if (static_cast<const void*>(&source) < static_cast<const void*>(&target)) {
    src_lk.lock();
    dst_lk.lock();
  } else {
    dst_lk.lock();
    src_lk.lock();
  }
  std::uint64_t merged = 0;
  std::set<IntervalIndex*> dirty;
  for (const auto& rec : source.records_) {
    if (target.identities_.count({rec.origin_tag, rec.origin_seq})) continue;
    auto bytes = source.payload_locked(rec.payload);
    IovRecord copy = rec;
    copy.payload = target.put_payload_locked(bytes.ok() ? ByteSpan(*bytes) : ByteSpan());
    target.add_locked(std::move(copy), true, &dirty);
    ++merged;
  }
  for (auto* index : dirty) index->rebuild();
  for (const auto& [name, cfg] : source.configs_) {
    if (!target.configs_.count(name)) target.configs_[name] = cfg;
  }
  return merged;
}

Result<std::unique_ptr<ConditionsStore>> ConditionsStore::extract_subset(
    const std::function<bool(const ConditionKey&)>& predicate, const std::string& config_name,
    std::string origin_tag) const {
  std::shared_lock lk(mu_);
  auto it = configs_.find(config_name);
  if (it == configs_.end()) return Error(ErrorCode::kUnknownConfig, config_name);
  const ConfigurationRecord& cfg = it->second;
  auto out = std::make_unique<ConditionsStore>(std::move(origin_tag));
  std::unique_lock out_lk(out->mu_);
  out->configs_[cfg.name] = cfg;
  std::set<IntervalIndex*> dirty;
  std::map<ConditionKey, std::optional<std::string>> revision_of;
  for (const auto& rec : records_) {
    if (rec.inserted_at > cfg.insertion_cutoff) continue;
    auto [pos, fresh] = revision_of.try_emplace(rec.key);
    if (fresh) {
      auto rev = bound_revision_locked(cfg, rec.key);
      if (rev.ok() && predicate && predicate(rec.key)) pos->second = *rev;
    }
    if (!pos->second || *pos->second != rec.revision) continue;
    auto bytes = payload_locked(rec.payload);
    IovRecord copy = rec;
    copy.payload = out->put_payload_locked(bytes.ok() ? ByteSpan(*bytes) : ByteSpan());
    out->add_locked(std::move(copy), true, &dirty);
  }
  for (auto* index : dirty) index->rebuild();
  out_lk.unlock();
  return out;
}

std::size_t ConditionsStore::record_count() const {
  std::shared_lock lk(mu_);
  return records_.size();
}

std::vector<IovRecord> ConditionsStore::records() const {
  std::shared_lock lk(mu_);
  return records_;
}

std::vector<ConditionKey> ConditionsStore::keys() const {
  std::shared_lock lk(mu_);
  std::set<ConditionKey> ks;
  for (const auto& [ik, idx] : indexes_) ks.insert(ik.key);
  return {ks.begin(), ks.end()};
}

SimTime ConditionsStore::last_inserted_at() const {
  std::shared_lock lk(mu_);
  return last_local_insert_;
}

// On-disk layout:
//   store.meta      origin_tag=..., last_local_insert=<us>, any_local_insert=0|1
//   strings.txt     one string per line; rows refer to them by line number
//   records.bin     72-byte big-endian rows, in seq order
//   configs.txt     name \t cutoff_us \t state_hex {\t prefix \t revision}
//   payload-N.pstf  payload segments in the storage image format
Status ConditionsStore::save(const std::filesystem::path& dir) const {
  std::shared_lock lk(mu_);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return Error(ErrorCode::kIoError, "cannot create " + dir.string());

  std::map<std::string, std::uint32_t> ids;
  std::vector<const std::string*> table;
  auto id_of = [&](const std::string& s) {
    auto [it, fresh] = ids.try_emplace(s, static_cast<std::uint32_t>(table.size()));
    if (fresh) table.push_back(&it->first);
    return it->second;
  };
  Bytes rows;
  rows.reserve(records_.size() * kRowBytes);
  ByteWriter w(&rows);
  for (const auto& r : records_) {
    w.u32(id_of(r.key.namespace_path));
    w.u32(id_of(r.key.condition_type));
    w.u32(id_of(r.revision));
    w.u32(id_of(r.origin_tag));
    w.i64(r.t_begin);
    w.i64(r.t_end);
    w.i64(to_us(r.inserted_at));
    w.u64(r.seq);
    w.u64(r.origin_seq);
    w.u64(r.payload.file_id);
    w.u64(r.payload.offset);
  }
  auto write = [&](const char* name, const std::string& body) -> Status {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    out << body;
    out.flush();
    if (!out) return Error(ErrorCode::kIoError, std::string("cannot write ") + name);
    return Status::OK();
  };
  std::string strings;
  for (const auto* s : table) strings += *s + "\n";
  PETASTORE_RETURN_IF_ERROR(write("strings.txt", strings));
  PETASTORE_RETURN_IF_ERROR(write("records.bin", std::string(rows.begin(), rows.end())));
  std::string cfgs;
  for (const auto& [name, c] : configs_) {
    cfgs += name + "\t" + std::to_string(to_us(c.insertion_cutoff)) + "\t" + c.state.to_hex();
    for (const auto& [p, rev] : c.bindings) cfgs += "\t" + p + "\t" + rev;
    cfgs += "\n";
  }
  PETASTORE_RETURN_IF_ERROR(write("configs.txt", cfgs));
  PETASTORE_RETURN_IF_ERROR(write(
      "store.meta", "origin_tag=" + origin_tag_ + "\nlast_local_insert=" +
                        std::to_string(to_us(last_local_insert_)) +
                        "\nany_local_insert=" + (any_local_insert_ ? "1" : "0") +
                        "\nsegments=" + std::to_string(segments_.size()) + "\n"));
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].empty()) continue;
    auto f = storage::build_stored_file(segments_[i],
                                        static_cast<std::uint8_t>(storage::CodecId::kReferenceLz));
    if (!f.ok()) return f.error();
    PETASTORE_RETURN_IF_ERROR(storage::write_image_file(dir / payload_file_name(i + 1), *f));
  }
  return Status::OK();
}

Result<std::unique_ptr<ConditionsStore>> ConditionsStore::load(const std::filesystem::path& dir) {
  auto read = [&](const char* name, std::string* out) -> Status {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) return Error(ErrorCode::kIoError, std::string("cannot read ") + (dir / name).string());
    std::stringstream ss;
    ss << in.rdbuf();
    *out = ss.str();
    return Status::OK();
  };
  auto lines = [](const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
  };
  std::string meta_text, strings_text, rows_text, cfg_text;
  PETASTORE_RETURN_IF_ERROR(read("store.meta", &meta_text));
  PETASTORE_RETURN_IF_ERROR(read("strings.txt", &strings_text));
  PETASTORE_RETURN_IF_ERROR(read("records.bin", &rows_text));
  PETASTORE_RETURN_IF_ERROR(read("configs.txt", &cfg_text));

  std::map<std::string, std::string> meta;
  for (const auto& l : lines(meta_text)) {
    const auto eq = l.find('=');
    if (eq != std::string::npos) meta[l.substr(0, eq)] = l.substr(eq + 1);
  }
  if (!meta.count("origin_tag") || !meta.count("segments")) {
    return Error(ErrorCode::kMalformed, "store.meta incomplete");
  }
  auto store = std::make_unique<ConditionsStore>(meta["origin_tag"]);
  std::unique_lock lk(store->mu_);
  try {
    store->last_local_insert_ = sim_time_from_us(std::stoll(meta["last_local_insert"]));
    store->any_local_insert_ = meta["any_local_insert"] == "1";
    const auto nseg = std::stoull(meta["segments"]);
    for (std::uint64_t i = 1; i <= nseg; ++i) {
      const auto p = dir / payload_file_name(i);
      if (!std::filesystem::exists(p)) {
        store->segments_.emplace_back();
        continue;
      }
      auto f = storage::read_image_file(p);
      if (!f.ok()) return f.error();
      auto frames = storage::select_frames(*f, 0, f->meta.logical_size);
      if (!frames.ok()) return frames.error();
      auto bytes = storage::client_decompress(*frames, 0, f->meta.logical_size);
      if (!bytes.ok()) return bytes.error();
      store->segments_.push_back(std::move(*bytes));
    }
  } catch (const std::exception&) {
    return Error(ErrorCode::kMalformed, "store.meta values");
  }

  const auto table = lines(strings_text);
  if (rows_text.size() % kRowBytes != 0) return Error(ErrorCode::kMalformed, "records.bin length");
  ByteReader r(ByteSpan(reinterpret_cast<const std::uint8_t*>(rows_text.data()), rows_text.size()));
  std::set<IntervalIndex*> dirty;
  while (!r.at_end()) {
    std::uint32_t ns = 0, type = 0, rev = 0, origin = 0;
    std::int64_t ins = 0;
    IovRecord rec;
    std::uint64_t seq = 0;
    r.u32(&ns);
    r.u32(&type);
    r.u32(&rev);
    r.u32(&origin);
    r.i64(&rec.t_begin);
    r.i64(&rec.t_end);
    r.i64(&ins);
    r.u64(&seq);
    r.u64(&rec.origin_seq);
    r.u64(&rec.payload.file_id);
    if (!r.u64(&rec.payload.offset)) return Error(ErrorCode::kMalformed, "records.bin row");
    if (std::max({ns, type, rev, origin}) >= table.size()) {
      return Error(ErrorCode::kMalformed, "records.bin string id");
    }
    rec.key = {table[ns], table[type]};
    rec.revision = table[rev];
    rec.origin_tag = table[origin];
    rec.inserted_at = sim_time_from_us(ins);
    PETASTORE_RETURN_IF_ERROR(store->validate(rec));
    if (seq != store->records_.size() + 1) return Error(ErrorCode::kMalformed, "records.bin seq");
    store->add_locked(std::move(rec), true, &dirty);
  }
  for (auto* index : dirty) index->rebuild();

  for (const auto& l : lines(cfg_text)) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string tok;
    while (std::getline(ss, tok, '\t')) f.push_back(tok);
    if (f.size() < 3 || f.size() % 2 == 0) return Error(ErrorCode::kMalformed, "configs.txt");
    ConfigurationRecord cfg;
    cfg.name = f[0];
    try {
      cfg.insertion_cutoff = sim_time_from_us(std::stoll(f[1]));
    } catch (const std::exception&) {
      return Error(ErrorCode::kMalformed, "configs.txt cutoff");
    }
    std::vector<RevisionBinding> sorted;
    for (std::size_t i = 3; i < f.size(); i += 2) cfg.bindings[f[i]] = f[i + 1];
    for (const auto& [p, rv] : cfg.bindings) sorted.push_back({p, rv});
    auto state = compute_state_id(cfg.name, cfg.insertion_cutoff, sorted);
    if (!state.ok() || state->to_hex() != f[2]) {
      return Error(ErrorCode::kMalformed, "configs.txt state id mismatch for " + cfg.name);
    }
    cfg.state = *state;
    store->configs_[cfg.name] = cfg;
  }
  lk.unlock();
  return store;
}

}  // namespace petastore::cdb
