#include "petastore/catalog/bridge.h"

#include <algorithm>
#include <sstream>

#include "petastore/core/path.h"

namespace petastore::catalog {

namespace {

constexpr const char* kMapName = "bridge.map";
constexpr const char* kFederationsName = "federations.list";

std::filesystem::path store_dir(const std::filesystem::path& root, const FederationId& id) {
  return root / ("fed-" + id.run_label + "-" + std::string(to_string(id.data_class)));
}

// Complete lines of a text file; a trailing partial line is reported through
// `committed` so the caller can trim it.
Result<std::vector<std::string>> read_lines(const std::filesystem::path& p, std::size_t* committed) {
  std::vector<std::string> out;
  *committed = 0;
  std::ifstream in(p, std::ios::binary);
  if (!in) return out;
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::size_t pos = 0;
  while (true) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    if (nl > pos) out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  *committed = pos;
  if (pos < text.size()) {
    in.close();
    std::error_code ec;
    std::filesystem::resize_file(p, pos, ec);
    if (ec) return Error(ErrorCode::kIoError, "cannot trim " + p.string());
  }
  return out;
}

}  // namespace

std::string_view to_string(FederationStatus s) {
  return s == FederationStatus::kOnline ? "ONLINE" : "OFFLINE";
}

bool parse_federation_status(std::string_view text, FederationStatus* out) {
  if (text == "ONLINE") {
    *out = FederationStatus::kOnline;
    return true;
  }
  if (text == "OFFLINE") {
    *out = FederationStatus::kOffline;
    return true;
  }
  return false;
}

Bridge::Bridge(locks::LockService& locks, const Clock& clock, events::EventStoreConfig store_config)
    : locks_(locks), clock_(clock), store_config_(store_config) {}

Bridge::~Bridge() = default;

Result<std::unique_ptr<Bridge>> Bridge::open(const std::filesystem::path& dir,
                                             locks::LockService& locks, const Clock& clock,
                                             events::EventStoreConfig store_config) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return Error(ErrorCode::kIoError, "cannot create " + dir.string());
  auto bridge = std::make_unique<Bridge>(locks, clock, store_config);
  bridge->dir_ = dir;
  PETASTORE_RETURN_IF_ERROR(bridge->load(dir));
  bridge->map_file_.open(dir / kMapName, std::ios::app | std::ios::binary);
  if (!bridge->map_file_) return Error(ErrorCode::kIoError, "cannot open " + (dir / kMapName).string());
  return bridge;
}

Result<std::unique_ptr<events::EventStore>> Bridge::make_store(const FederationId& id) {
  if (!dir_) return std::make_unique<events::EventStore>(id, locks_, clock_, store_config_);
  return events::EventStore::open(store_dir(*dir_, id), id, locks_, clock_, store_config_);
}

Status Bridge::load(const std::filesystem::path& dir) {
  std::size_t committed;
  auto feds = read_lines(dir / kFederationsName, &committed);
  if (!feds.ok()) return feds.error();
  for (const auto& line : *feds) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) return Error(ErrorCode::kMalformed, "federations.list: " + line);
    auto id = FederationId::parse(line.substr(0, tab));
    FederationStatus status;
    if (!id.ok() || !parse_federation_status(line.substr(tab + 1), &status)) {
      return Error(ErrorCode::kMalformed, "federations.list: " + line);
    }
    auto store = make_store(*id);
    if (!store.ok()) return store.error();
    federations_[*id] = Federation{{*id, status}, std::move(*store)};
  }
  auto map = read_lines(dir / kMapName, &committed);
  if (!map.ok()) return map.error();
  for (const auto& line : *map) {
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) return Error(ErrorCode::kMalformed, "bridge.map: " + line);
    BridgeEntry e;
    e.path = line.substr(0, t1);
    auto fed = FederationId::parse(line.substr(t1 + 1, t2 - t1 - 1));
    if (!fed.ok() || !parse_collection_kind(line.substr(t2 + 1), &e.kind) ||
        !federations_.count(*fed) || !split_path(e.path).ok()) {
      return Error(ErrorCode::kMalformed, "bridge.map: " + line);
    }
    e.federation = *fed;
    if (!bindings_.emplace(e.path, e).second) {
      return Error(ErrorCode::kMalformed, "bridge.map: duplicate " + e.path);
    }
  }
  return Status::OK();
}

Status Bridge::write_federations_locked() {
  if (!dir_) return Status::OK();
  const auto tmp = *dir_ / (std::string(kFederationsName) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    for (const auto& [id, f] : federations_) {
      out << id.to_string() << '\t' << to_string(f.desc.status) << '\n';
    }
    out.flush();
    if (!out) return Error(ErrorCode::kIoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, *dir_ / kFederationsName, ec);
  if (ec) return Error(ErrorCode::kIoError, "cannot replace federations.list: " + ec.message());
  return Status::OK();
}

Status Bridge::append_binding(const BridgeEntry& e) {
  if (!dir_) return Status::OK();
  map_file_ << e.path << '\t' << e.federation.to_string() << '\t' << to_string(e.kind) << '\n';
  map_file_.flush();
  if (!map_file_) return Error(ErrorCode::kIoError, "bridge.map write failed");
  return Status::OK();
}

Status Bridge::register_federation(const FederationDescriptor& d) {
  std::lock_guard w(write_mu_);
  {
    std::shared_lock lk(mu_);
    if (federations_.count(d.id)) return Error(ErrorCode::kDuplicateFederation, d.id.to_string());
  }
  auto store = make_store(d.id);
  if (!store.ok()) return store.error();
  std::unique_lock lk(mu_);
  // New federations always start ONLINE.
  federations_[d.id] = Federation{{d.id, FederationStatus::kOnline}, std::move(*store)};
  if (auto st = write_federations_locked(); !st.ok()) {
    federations_.erase(d.id);
    return st;
  }
  return Status::OK();
}

Status Bridge::set_federation_status(const FederationId& id, FederationStatus status) {
  std::lock_guard w(write_mu_);
  std::unique_lock lk(mu_);
  auto it = federations_.find(id);
  if (it == federations_.end()) return Error(ErrorCode::kUnknownFederation, id.to_string());
  const auto old = it->second.desc.status;
  it->second.desc.status = status;
  if (auto st = write_federations_locked(); !st.ok()) {
    it->second.desc.status = old;
    return st;
  }
  return Status::OK();
}

Result<FederationStatus> Bridge::federation_status(const FederationId& id) const {
  std::shared_lock lk(mu_);
  auto it = federations_.find(id);
  if (it == federations_.end()) return Error(ErrorCode::kUnknownFederation, id.to_string());
  return it->second.desc.status;
}

std::vector<FederationDescriptor> Bridge::federations() const {
  std::shared_lock lk(mu_);
  std::vector<FederationDescriptor> out;
  for (const auto& [id, f] : federations_) out.push_back(f.desc);
  return out;
}

events::EventStore* Bridge::store(const FederationId& id) const {
  std::shared_lock lk(mu_);
  auto it = federations_.find(id);
  return it == federations_.end() ? nullptr : it->second.store.get();
}

Result<const Bridge::Federation*> Bridge::online_locked(const FederationId& id) const {
  auto it = federations_.find(id);
  if (it == federations_.end()) return Error(ErrorCode::kUnknownFederation, id.to_string());
  if (it->second.desc.status != FederationStatus::kOnline) {
    return Error(ErrorCode::kFederationOffline, id.to_string());
  }
  return &it->second;
}

Status Bridge::bind_collection(const std::string& path, const FederationId& fed,
                               CollectionKind kind) {
  auto segs = split_path(path);
  if (!segs.ok()) return segs.error();
  if (segs->empty()) return Error(ErrorCode::kInvalidArgument, "cannot bind the root");
  std::lock_guard w(write_mu_);
  {
    std::shared_lock lk(mu_);
    if (!federations_.count(fed)) return Error(ErrorCode::kUnknownFederation, fed.to_string());
    if (bindings_.count(path)) return Error(ErrorCode::kDuplicatePath, path);
  }
  BridgeEntry e{path, fed, kind};
  PETASTORE_RETURN_IF_ERROR(append_binding(e));
  std::unique_lock lk(mu_);
  bindings_.emplace(path, std::move(e));
  return Status::OK();
}

Result<BridgeEntry> Bridge::resolve(const std::string& path) const {
  std::shared_lock lk(mu_);
  auto it = bindings_.find(path);
  if (it == bindings_.end()) return Error(ErrorCode::kNotFound, path);
  const auto& fed = federations_.at(it->second.federation);
  if (fed.desc.status != FederationStatus::kOnline) {
    return Error(ErrorCode::kFederationOffline, it->second.federation.to_string());
  }
  return it->second;
}

std::vector<BridgeEntry> Bridge::entries() const {
  std::shared_lock lk(mu_);
  std::vector<BridgeEntry> out;
  out.reserve(bindings_.size());
  for (const auto& [p, e] : bindings_) out.push_back(e);
  std::sort(out.begin(), out.end(),
            [](const BridgeEntry& a, const BridgeEntry& b) { return a.path < b.path; });
  return out;
}

std::size_t Bridge::binding_count() const {
  std::shared_lock lk(mu_);
  return bindings_.size();
}

Result<events::CollectionInfo> Bridge::create_collection(const std::string& path,
                                                         const FederationId& fed,
                                                         CollectionKind kind) {
  std::lock_guard w(write_mu_);
  events::EventStore* st;
  {
    std::shared_lock lk(mu_);
    auto f = online_locked(fed);
    if (!f.ok()) return f.error();
    if (bindings_.count(path)) return Error(ErrorCode::kDuplicatePath, path);
    st = (*f)->store.get();
  }
  auto info = st->create_collection(path, kind);
  if (!info.ok()) return info.error();
  BridgeEntry e{path, fed, kind};
  if (auto s = append_binding(e); !s.ok()) {
    (void)st->drop_collection(path);
    return s.error();
  }
  std::unique_lock lk(mu_);
  bindings_.emplace(path, std::move(e));
  return info;
}

Result<events::CollectionInfo> Bridge::create_skim(const std::string& path,
                                                   const FederationId& fed,
                                                   const std::string& source_stream,
                                                   const std::vector<std::uint64_t>& ordinals,
                                                   const std::string& selection_name) {
  std::lock_guard w(write_mu_);
  events::EventStore* st;
  {
    std::shared_lock lk(mu_);
    auto f = online_locked(fed);
    if (!f.ok()) return f.error();
    if (bindings_.count(path)) return Error(ErrorCode::kDuplicatePath, path);
    st = (*f)->store.get();
  }
  auto info = st->create_skim(path, source_stream, ordinals, selection_name);
  if (!info.ok()) return info.error();
  BridgeEntry e{path, fed, CollectionKind::kSkim};
  if (auto s = append_binding(e); !s.ok()) {
    (void)st->drop_collection(path);
    return s.error();
  }
  std::unique_lock lk(mu_);
  bindings_.emplace(path, std::move(e));
  return info;
}

Result<std::vector<EventHeader>> Bridge::read_collection(const std::string& path) {
  auto e = resolve(path);
  if (!e.ok()) return e.error();
  events::EventStore* st = store(e->federation);
  return st->read_collection(path);
}

std::string Bridge::deep_copy_path(const std::string& path, const FederationId& target) {
  return path + "@" + target.to_string();
}

Result<std::string> Bridge::deep_copy(const std::string& path, const FederationId& target) {
  std::lock_guard w(write_mu_);
  auto src = resolve(path);
  if (!src.ok()) return src.error();
  const std::string out_path = deep_copy_path(path, target);
  events::EventStore* source_store;
  events::EventStore* target_store;
  {
    std::shared_lock lk(mu_);
    auto t = online_locked(target);
    if (!t.ok()) return t.error();
    if (bindings_.count(out_path)) return Error(ErrorCode::kDuplicatePath, out_path);
    target_store = (*t)->store.get();
    source_store = federations_.at(src->federation).store.get();
  }
  auto events = source_store->read_collection(path);
  if (!events.ok()) return events.error();
  auto installed = target_store->install_stream(out_path, *events);
  if (!installed.ok()) return installed.error();
  // Binding is the commit point.
  BridgeEntry e{out_path, target, CollectionKind::kStream};
  if (auto s = append_binding(e); !s.ok()) {
    (void)target_store->drop_collection(out_path);
    return s.error();
  }
  std::unique_lock lk(mu_);
  bindings_.emplace(out_path, std::move(e));
  return out_path;
}

}  // namespace petastore::catalog
