#include "petastore/events/event_store.h"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "petastore/core/event_header.h"
#include "petastore/core/path.h"
#include "petastore/storage/stored_file.h"

namespace petastore::events {

namespace {

constexpr const char* kJournalName = "namespace.journal";

Bytes encode_headers(const std::vector<EventHeader>& events) {
  Bytes out;
  ByteWriter w(&out);
  for (const auto& h : events) {
    const Bytes enc = encode_event_header(h);
    w.u16(static_cast<std::uint16_t>(enc.size()));
    w.raw(enc);
  }
  return out;
}

Result<std::vector<EventHeader>> decode_headers(ByteSpan bytes) {
  std::vector<EventHeader> out;
  ByteReader r(bytes);
  while (!r.at_end()) {
    std::uint16_t n;
    ByteSpan body;
    if (!r.u16(&n) || !r.raw(n, &body)) return Error(ErrorCode::kMalformed, "truncated segment");
    auto h = decode_event_header(body);
    if (!h.ok()) return h.error();
    out.push_back(*h);
  }
  return out;
}

Bytes encode_ordinals(const std::vector<std::uint64_t>& ords) {
  Bytes out;
  ByteWriter w(&out);
  for (auto o : ords) w.u64(o);
  return out;
}

Result<std::vector<std::uint64_t>> decode_ordinals(ByteSpan bytes) {
  if (bytes.size() % 8 != 0) return Error(ErrorCode::kMalformed, "ordinal segment length");
  std::vector<std::uint64_t> out(bytes.size() / 8);
  ByteReader r(bytes);
  for (auto& o : out) r.u64(&o);
  return out;
}

Result<Bytes> load_segment(const std::filesystem::path& path) {
  auto f = storage::read_image_file(path);
  if (!f.ok()) return f.error();
  auto frames = storage::select_frames(*f, 0, f->meta.logical_size);
  if (!frames.ok()) return frames.error();
  return storage::client_decompress(*frames, 0, f->meta.logical_size);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
    if (tab == std::string::npos) break;
    pos = tab + 1;
  }
  return out;
}

}  // namespace

EventStore::EventStore(FederationId federation, locks::LockService& locks, const Clock& clock,
                       EventStoreConfig config)
    : federation_(std::move(federation)),
      locks_(locks),
      clock_(clock),
      config_(config),
      client_prefix_("store/" + federation_.to_string() + "/"),
      tree_(config.node_limit) {}

EventStore::~EventStore() = default;

class EventStore::MetadataLock {
 public:
  MetadataLock(locks::LockService& svc, locks::ClientId ephemeral)
      : svc_(svc), ephemeral_(std::move(ephemeral)) {}
  ~MetadataLock() { reset(); }
  MetadataLock(const MetadataLock&) = delete;
  MetadataLock& operator=(const MetadataLock&) = delete;

  void hold(const locks::ClientId& client, std::string resource) {
    lock_ = locks::ScopedLock(&svc_, client, std::move(resource));
  }
  void reset() {
    lock_.reset();
    if (!ephemeral_.empty()) (void)svc_.disconnect(ephemeral_);
    ephemeral_.clear();
  }

 private:
  locks::LockService& svc_;
  locks::ClientId ephemeral_;
  locks::ScopedLock lock_;
};

Result<std::unique_ptr<EventStore>> EventStore::open(const std::filesystem::path& dir,
                                                     FederationId federation,
                                                     locks::LockService& locks,
                                                     const Clock& clock, EventStoreConfig config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  auto store = std::make_unique<EventStore>(std::move(federation), locks, clock, config);
  PETASTORE_RETURN_IF_ERROR(store->replay(dir));
  store->dir_ = dir;
  store->journal_.open(dir / kJournalName, std::ios::app | std::ios::binary);
  if (!store->journal_) return Error(ErrorCode::kIoError, "cannot open journal in " + dir.string());
  return store;
}

std::string EventStore::metadata_resource(const FederationId& fed,
                                          std::string_view collection_path) {
  return fed.to_string() + ":meta:" + parent_path(collection_path);
}

Result<std::unique_ptr<EventStore::MetadataLock>> EventStore::lock_metadata(
    const locks::ClientId* client, const std::string& path, locks::LockMode mode) {
  locks::ClientId id;
  std::unique_ptr<MetadataLock> guard;
  if (client != nullptr) {
    PETASTORE_RETURN_IF_ERROR(locks_.heartbeat(*client, clock_.now()));
    id = *client;
    guard = std::make_unique<MetadataLock>(locks_, locks::ClientId{});
  } else {
    id = client_prefix_ + std::to_string(next_session_.fetch_add(1));
    PETASTORE_RETURN_IF_ERROR(locks_.connect(id));
    guard = std::make_unique<MetadataLock>(locks_, id);
  }
  std::string resource = metadata_resource(federation_, path);
  PETASTORE_RETURN_IF_ERROR(locks_.acquire_wait(id, resource, mode, config_.lock_timeout));
  guard->hold(id, std::move(resource));
  return guard;
}

std::shared_ptr<EventStore::Collection> EventStore::find_locked(const std::string& path) const {
  auto segs = split_path(path);
  if (!segs.ok()) return nullptr;
  auto id = tree_.find(*segs);
  if (!id) return nullptr;
  return collections_.at(*id);
}

std::shared_ptr<EventStore::Collection> EventStore::find(const std::string& path) const {
  std::shared_lock lk(mu_);
  return find_locked(path);
}

Result<CollectionInfo> EventStore::register_locked(std::shared_ptr<Collection> c) {
  auto segs = split_path(c->info.path);
  const CollectionId id = next_id_++;
  c->info.id = id;
  if (!tree_.insert(*segs, id)) return Error(ErrorCode::kDuplicatePath, c->info.path);
  collections_[id] = c;
  CollectionInfo info = c->info;
  info.size = c->info.kind == CollectionKind::kStream ? c->events.size() : c->ordinals.size();
  return info;
}

Status EventStore::journal(const std::string& line) {
  if (!dir_) return Status::OK();
  std::lock_guard lk(io_mu_);
  journal_ << line << '\n';
  journal_.flush();
  if (!journal_) return Error(ErrorCode::kIoError, "journal write failed");
  return Status::OK();
}

Result<std::string> EventStore::write_segment(const Bytes& payload) {
  if (!dir_ || payload.empty()) return std::string("-");
  std::string name;
  {
    std::lock_guard lk(io_mu_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "seg-%06llu.pstf",
                  static_cast<unsigned long long>(next_segment_++));
    name = buf;
  }
  auto f = storage::build_stored_file(payload,
                                      static_cast<std::uint8_t>(storage::CodecId::kReferenceLz));
  if (!f.ok()) return f.error();
  PETASTORE_RETURN_IF_ERROR(storage::write_image_file(*dir_ / name, *f));
  return name;
}

Result<CollectionInfo> EventStore::create_collection(const std::string& path,
                                                     CollectionKind kind) {
  auto segs = split_path(path);
  if (!segs.ok()) return segs.error();
  if (segs->empty()) return Error(ErrorCode::kInvalidArgument, "root is not a collection");
  auto lock = lock_metadata(nullptr, path, locks::LockMode::kUpdate);
  if (!lock.ok()) return lock.error();

  std::unique_lock lk(mu_);
  if (find_locked(path)) return Error(ErrorCode::kDuplicatePath, path);
  PETASTORE_RETURN_IF_ERROR(journal("C\t" + path + "\t" + std::string(to_string(kind))));
  auto c = std::make_shared<Collection>();
  c->info.path = path;
  c->info.kind = kind;
  return register_locked(std::move(c));
}

Result<std::uint64_t> EventStore::append_events(const std::string& path,
                                                const std::vector<EventHeader>& headers) {
  auto c = find(path);
  if (!c) return Error(ErrorCode::kNotFound, path);
  if (c->info.kind != CollectionKind::kStream) {
    return Error(ErrorCode::kWrongKind, path + " is a skim");
  }
  std::unique_lock lk(c->mu);
  if (!headers.empty() && dir_) {
    auto seg = write_segment(encode_headers(headers));
    if (!seg.ok()) return seg.error();
    PETASTORE_RETURN_IF_ERROR(
        journal("A\t" + path + "\t" + *seg + "\t" + std::to_string(headers.size())));
  }
  c->events.insert(c->events.end(), headers.begin(), headers.end());
  return static_cast<std::uint64_t>(headers.size());
}

Result<CollectionInfo> EventStore::create_skim(const std::string& path,
                                               const std::string& source_stream,
                                               const std::vector<std::uint64_t>& ordinals,
                                               const std::string& selection_name) {
  return create_skim_as(nullptr, path, source_stream, ordinals, selection_name);
}

Result<CollectionInfo> EventStore::create_skim(const locks::ClientId& client,
                                               const std::string& path,
                                               const std::string& source_stream,
                                               const std::vector<std::uint64_t>& ordinals,
                                               const std::string& selection_name) {
  return create_skim_as(&client, path, source_stream, ordinals, selection_name);
}

Result<CollectionInfo> EventStore::create_skim_as(const locks::ClientId* client,
                                                  const std::string& path,
                                                  const std::string& source_stream,
                                                  const std::vector<std::uint64_t>& ordinals,
                                                  const std::string& selection_name) {
  auto segs = split_path(path);
  if (!segs.ok()) return segs.error();
  if (segs->empty()) return Error(ErrorCode::kInvalidArgument, "root is not a collection");
  if (selection_name.find_first_of("\t\n") != std::string::npos) {
    return Error(ErrorCode::kInvalidArgument, "selection name contains a tab or newline");
  }

  phase("build");
  auto src = find(source_stream);
  if (!src) return Error(ErrorCode::kNotFound, source_stream);
  if (src->info.kind != CollectionKind::kStream) {
    return Error(ErrorCode::kWrongKind, source_stream + " is not a stream");
  }
  std::uint64_t source_size;
  {
    std::shared_lock lk(src->mu);
    source_size = src->events.size();
  }
  for (std::size_t i = 0; i < ordinals.size(); ++i) {
    if (i > 0 && ordinals[i] <= ordinals[i - 1]) {
      return Error(ErrorCode::kInvalidArgument, "ordinals must be strictly increasing");
    }
    if (ordinals[i] >= source_size) {
      return Error(ErrorCode::kOrdinalOutOfRange,
                   std::to_string(ordinals[i]) + " >= " + std::to_string(source_size));
    }
  }
  auto c = std::make_shared<Collection>();
  c->info.path = path;
  c->info.kind = CollectionKind::kSkim;
  c->info.source_path = source_stream;
  c->info.selection_name = selection_name;
  c->ordinals = ordinals;
  auto seg = write_segment(encode_ordinals(ordinals));
  if (!seg.ok()) return seg.error();

  auto lock = lock_metadata(client, path, locks::LockMode::kUpdate);
  if (!lock.ok()) return lock.error();
  phase("lock");
  Result<CollectionInfo> out = Error(ErrorCode::kInvalidArgument);
  {
    phase("mutate");
    std::unique_lock lk(mu_);
    if (find_locked(path)) {
      out = Error(ErrorCode::kDuplicatePath, path);
    } else if (auto st = journal("K\t" + path + "\t" + source_stream + "\t" + selection_name +
                                 "\t" + *seg + "\t" + std::to_string(ordinals.size()));
               !st.ok()) {
      out = st.error();
    } else {
      out = register_locked(std::move(c));
    }
  }
  (*lock)->reset();
  phase("unlock");
  return out;
}

Result<CollectionInfo> EventStore::create_skim_unchecked(const std::string& path,
                                                         const std::string& source_stream,
                                                         const std::vector<std::uint64_t>& ordinals) {
  auto segs = split_path(path);
  if (!segs.ok()) return segs.error();
  auto c = std::make_shared<Collection>();
  c->info.path = path;
  c->info.kind = CollectionKind::kSkim;
  c->info.source_path = source_stream;
  c->ordinals = ordinals;
  auto seg = write_segment(encode_ordinals(ordinals));
  if (!seg.ok()) return seg.error();
  std::unique_lock lk(mu_);
  if (find_locked(path)) return Error(ErrorCode::kDuplicatePath, path);
  PETASTORE_RETURN_IF_ERROR(journal("K\t" + path + "\t" + source_stream + "\t\t" + *seg + "\t" +
                                    std::to_string(ordinals.size())));
  return register_locked(std::move(c));
}

Result<CollectionInfo> EventStore::install_stream(const std::string& path,
                                                  const std::vector<EventHeader>& events) {
  auto segs = split_path(path);
  if (!segs.ok()) return segs.error();
  if (segs->empty()) return Error(ErrorCode::kInvalidArgument, "root is not a collection");
  if (contains(path)) return Error(ErrorCode::kDuplicatePath, path);
  auto c = std::make_shared<Collection>();
  c->info.path = path;
  c->info.kind = CollectionKind::kStream;
  c->events = events;
  auto seg = write_segment(encode_headers(events));
  if (!seg.ok()) return seg.error();

  auto lock = lock_metadata(nullptr, path, locks::LockMode::kUpdate);
  if (!lock.ok()) return lock.error();
  std::unique_lock lk(mu_);
  if (find_locked(path)) return Error(ErrorCode::kDuplicatePath, path);
  PETASTORE_RETURN_IF_ERROR(
      journal("S\t" + path + "\t" + *seg + "\t" + std::to_string(events.size())));
  return register_locked(std::move(c));
}

Status EventStore::drop_collection(const std::string& path) {
  auto segs = split_path(path);
  if (!segs.ok()) return segs.error();
  auto lock = lock_metadata(nullptr, path, locks::LockMode::kUpdate);
  if (!lock.ok()) return lock.error();
  std::unique_lock lk(mu_);
  auto id = tree_.find(*segs);
  if (!id) return Error(ErrorCode::kNotFound, path);
  PETASTORE_RETURN_IF_ERROR(journal("D\t" + path));
  tree_.erase(*segs);
  collections_.erase(*id);
  return Status::OK();
}

Result<std::vector<EventHeader>> EventStore::materialize(const Collection& c) const {
  if (c.info.kind == CollectionKind::kStream) {
    std::shared_lock lk(c.mu);
    return c.events;
  }
  std::vector<std::uint64_t> ords;
  {
    std::shared_lock lk(c.mu);
    ords = c.ordinals;
  }
  if (ords.empty()) return std::vector<EventHeader>{};
  auto src = find(c.info.source_path);
  if (!src || src->info.kind != CollectionKind::kStream) {
    return Error(ErrorCode::kDanglingPointer, c.info.path + " -> " + c.info.source_path);
  }
  std::vector<EventHeader> out;
  out.reserve(ords.size());
  std::shared_lock lk(src->mu);
  for (auto o : ords) {
    if (o >= src->events.size()) {
      return Error(ErrorCode::kDanglingPointer,
                   c.info.path + " -> " + c.info.source_path + "#" + std::to_string(o));
    }
    out.push_back(src->events[o]);
  }
  return out;
}

Result<std::vector<EventHeader>> EventStore::read_collection(const std::string& path) {
  return read_as(nullptr, path);
}

Result<std::vector<EventHeader>> EventStore::read_collection(const locks::ClientId& client,
                                                             const std::string& path) {
  return read_as(&client, path);
}

Result<std::vector<EventHeader>> EventStore::read_as(const locks::ClientId* client,
                                                     const std::string& path) {
  auto c = find(path);
  if (!c) return Error(ErrorCode::kNotFound, path);
  auto lock = lock_metadata(client, path, locks::LockMode::kRead);
  if (!lock.ok()) return lock.error();
  return materialize(*c);
}

Result<CollectionInfo> EventStore::info(const std::string& path) const {
  auto c = find(path);
  if (!c) return Error(ErrorCode::kNotFound, path);
  std::shared_lock lk(c->mu);
  CollectionInfo out = c->info;
  out.size = out.kind == CollectionKind::kStream ? c->events.size() : c->ordinals.size();
  return out;
}

Result<std::vector<EventRef>> EventStore::pointers(const std::string& path) const {
  auto c = find(path);
  if (!c) return Error(ErrorCode::kNotFound, path);
  if (c->info.kind != CollectionKind::kSkim) return Error(ErrorCode::kWrongKind, path);
  std::shared_lock lk(c->mu);
  std::vector<EventRef> out;
  out.reserve(c->ordinals.size());
  for (auto o : c->ordinals) out.push_back(EventRef{federation_, c->info.source_path, o});
  return out;
}

Result<EventHeader> EventStore::dereference(const EventRef& ref) const {
  if (ref.federation != federation_) {
    return Error(ErrorCode::kDanglingPointer, "foreign federation " + ref.federation.to_string());
  }
  auto c = find(ref.collection_path);
  if (!c || c->info.kind != CollectionKind::kStream) {
    return Error(ErrorCode::kDanglingPointer, ref.collection_path);
  }
  std::shared_lock lk(c->mu);
  if (ref.ordinal >= c->events.size()) {
    return Error(ErrorCode::kDanglingPointer,
                 ref.collection_path + "#" + std::to_string(ref.ordinal));
  }
  return c->events[ref.ordinal];
}

bool EventStore::contains(const std::string& path) const { return find(path) != nullptr; }

std::vector<CollectionInfo> EventStore::list(const std::string& prefix) const {
  std::vector<std::shared_ptr<Collection>> hits;
  {
    std::shared_lock lk(mu_);
    tree_.for_each([&](const std::string& path, CollectionId id) {
      if (path_has_prefix(path, prefix)) hits.push_back(collections_.at(id));
    });
  }
  std::vector<CollectionInfo> out;
  out.reserve(hits.size());
  for (const auto& c : hits) {
    std::shared_lock lk(c->mu);
    CollectionInfo i = c->info;
    i.size = i.kind == CollectionKind::kStream ? c->events.size() : c->ordinals.size();
    out.push_back(std::move(i));
  }
  std::sort(out.begin(), out.end(),
            [](const CollectionInfo& a, const CollectionInfo& b) { return a.path < b.path; });
  return out;
}

std::size_t EventStore::collection_count() const {
  std::shared_lock lk(mu_);
  return tree_.size();
}

TreeShape EventStore::tree_shape() const {
  std::shared_lock lk(mu_);
  return tree_.shape();
}

Status EventStore::check_self_contained() const {
  for (const auto& info : list("/")) {
    if (info.kind != CollectionKind::kSkim) continue;
    auto refs = pointers(info.path);
    if (!refs.ok()) return refs.error();
    for (const auto& ref : *refs) {
      auto h = dereference(ref);
      if (!h.ok()) return h.error();
    }
  }
  return Status::OK();
}

Status EventStore::replay(const std::filesystem::path& dir) {
  std::ifstream in(dir / kJournalName, std::ios::binary);
  if (!in) return Status::OK();
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  auto segment_no = [this](const std::string& name) {
    unsigned long long n = 0;
    if (std::sscanf(name.c_str(), "seg-%llu.pstf", &n) == 1) {
      next_segment_ = std::max<std::uint64_t>(next_segment_, n + 1);
    }
  };
  auto bad = [&](const std::string& line) {
    return Error(ErrorCode::kMalformed, "journal line: " + line);
  };

  std::size_t pos = 0;
  while (true) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      // A torn trailing record never committed; cut it so new records start
      // on a fresh line.
      if (pos < text.size()) {
        in.close();
        std::error_code ec;
        std::filesystem::resize_file(dir / kJournalName, pos, ec);
        if (ec) return Error(ErrorCode::kIoError, "cannot trim journal: " + ec.message());
      }
      break;
    }
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    std::unique_lock lk(mu_);
    if (f[0] == "C" && f.size() == 3) {
      auto c = std::make_shared<Collection>();
      c->info.path = f[1];
      if (!parse_collection_kind(f[2], &c->info.kind)) return bad(line);
      if (!split_path(f[1]).ok()) return bad(line);
      auto r = register_locked(std::move(c));
      if (!r.ok()) return r.error();
    } else if (f[0] == "A" && f.size() == 4) {
      auto c = find_locked(f[1]);
      if (!c) return bad(line);
      segment_no(f[2]);
      auto bytes = load_segment(dir / f[2]);
      if (!bytes.ok()) return bytes.error();
      auto hs = decode_headers(*bytes);
      if (!hs.ok()) return hs.error();
      c->events.insert(c->events.end(), hs->begin(), hs->end());
    } else if (f[0] == "S" && f.size() == 4) {
      auto c = std::make_shared<Collection>();
      c->info.path = f[1];
      if (!split_path(f[1]).ok()) return bad(line);
      if (f[2] != "-") {
        segment_no(f[2]);
        auto bytes = load_segment(dir / f[2]);
        if (!bytes.ok()) return bytes.error();
        auto hs = decode_headers(*bytes);
        if (!hs.ok()) return hs.error();
        c->events = std::move(*hs);
      }
      auto r = register_locked(std::move(c));
      if (!r.ok()) return r.error();
    } else if (f[0] == "K" && f.size() == 6) {
      auto c = std::make_shared<Collection>();
      c->info.path = f[1];
      c->info.kind = CollectionKind::kSkim;
      c->info.source_path = f[2];
      c->info.selection_name = f[3];
      if (!split_path(f[1]).ok()) return bad(line);
      if (f[4] != "-") {
        segment_no(f[4]);
        auto bytes = load_segment(dir / f[4]);
        if (!bytes.ok()) return bytes.error();
        auto ords = decode_ordinals(*bytes);
        if (!ords.ok()) return ords.error();
        c->ordinals = std::move(*ords);
      }
      auto r = register_locked(std::move(c));
      if (!r.ok()) return r.error();
    } else if (f[0] == "D" && f.size() == 2) {
      auto segs = split_path(f[1]);
      if (!segs.ok()) return bad(line);
      auto id = tree_.find(*segs);
      if (!id) return bad(line);
      tree_.erase(*segs);
      collections_.erase(*id);
    } else {
      return bad(line);
    }
  }
  return Status::OK();
}

}  // namespace petastore::events
