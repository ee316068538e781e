#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "petastore/core/result.h"
#include "petastore/core/types.h"
#include "petastore/events/event_store.h"
#include "petastore/locks/lock_service.h"

namespace petastore::catalog {

enum class FederationStatus : std::uint8_t { kOnline, kOffline };

std::string_view to_string(FederationStatus s);
bool parse_federation_status(std::string_view text, FederationStatus* out);

struct FederationDescriptor {
  FederationId id;
  FederationStatus status = FederationStatus::kOnline;
};

struct BridgeEntry {
  std::string path;
  FederationId federation;
  CollectionKind kind = CollectionKind::kStream;

  bool operator==(const BridgeEntry&) const = default;
};

// Name service over several federations: maps collection paths to the
// federation that holds them and owns one EventStore per federation.
//
// resolve() only takes a shared lock, so lookups never wait on each other.
// Mutations (register, bind, status changes, deep copy) are serialized.
//
// When opened on a directory the bridge keeps:
//   federations.list   <run_label>:<class>\t<ONLINE|OFFLINE>
//   bridge.map         <path>\t<run_label>:<class>\t<STREAM|SKIM>
//   fed-<run>-<class>/ one event-store directory per federation
class Bridge {
 public:
  Bridge(locks::LockService& locks, const Clock& clock, events::EventStoreConfig store_config = {});
  ~Bridge();

  static Result<std::unique_ptr<Bridge>> open(const std::filesystem::path& dir,
                                              locks::LockService& locks, const Clock& clock,
                                              events::EventStoreConfig store_config = {});

  Status register_federation(const FederationDescriptor& d);
  Status set_federation_status(const FederationId& id, FederationStatus status);
  Result<FederationStatus> federation_status(const FederationId& id) const;
  std::vector<FederationDescriptor> federations() const;

  Status bind_collection(const std::string& path, const FederationId& fed, CollectionKind kind);
  Result<BridgeEntry> resolve(const std::string& path) const;
  std::vector<BridgeEntry> entries() const;
  std::size_t binding_count() const;

  // Creates the collection in the owning federation's store and binds it.
  Result<events::CollectionInfo> create_collection(const std::string& path,
                                                   const FederationId& fed, CollectionKind kind);
  Result<events::CollectionInfo> create_skim(const std::string& path, const FederationId& fed,
                                             const std::string& source_stream,
                                             const std::vector<std::uint64_t>& ordinals,
                                             const std::string& selection_name = {});
  // Reads through the bridge: resolve, then read from the owning store.
  Result<std::vector<EventHeader>> read_collection(const std::string& path);

  // Materializes the collection (following skim pointers) as a new stream
  // "<path>@<run_label>:<class>" in `target`. Either the copy is bound and
  // visible, or neither the target store nor the bridge changed.
  Result<std::string> deep_copy(const std::string& path, const FederationId& target);
  static std::string deep_copy_path(const std::string& path, const FederationId& target);

  // Null when the federation is not registered.
  events::EventStore* store(const FederationId& id) const;

 private:
  struct Federation {
    FederationDescriptor desc;
    std::unique_ptr<events::EventStore> store;
  };

  Result<const Federation*> online_locked(const FederationId& id) const;
  Status append_binding(const BridgeEntry& e);
  Status write_federations_locked();
  Status load(const std::filesystem::path& dir);
  Result<std::unique_ptr<events::EventStore>> make_store(const FederationId& id);

  locks::LockService& locks_;
  const Clock& clock_;
  events::EventStoreConfig store_config_;

  std::mutex write_mu_;  // serializes all mutations
  mutable std::shared_mutex mu_;
  std::map<FederationId, Federation> federations_;
  std::unordered_map<std::string, BridgeEntry> bindings_;

  std::optional<std::filesystem::path> dir_;
  std::ofstream map_file_;
};

}  // namespace petastore::catalog
