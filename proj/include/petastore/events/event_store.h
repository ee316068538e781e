#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "petastore/core/bytes.h"
#include "petastore/core/result.h"
#include "petastore/core/time.h"
#include "petastore/core/types.h"
#include "petastore/events/namespace_tree.h"
#include "petastore/locks/lock_service.h"

namespace petastore::events {

inline constexpr std::size_t kDefaultNodeLimit = 65536;

struct EventStoreConfig {
  std::size_t node_limit = kDefaultNodeLimit;
  // Real-time wait for a metadata lock before giving up with LOCK_TIMEOUT.
  std::chrono::milliseconds lock_timeout{30'000};
};

struct CollectionInfo {
  CollectionId id = 0;
  std::string path;
  CollectionKind kind = CollectionKind::kStream;
  std::uint64_t size = 0;
  // Skims only.
  std::string source_path;
  std::string selection_name;
};

// Per-federation store of stream and skim collections.
//
// Namespace writes take an UPDATE lock on the parent directory's metadata
// resource ("<federation>:meta:<dir>") and reads take READ on it. Calls made
// without an explicit client open a short-lived lock-service session of
// their own; a caller-supplied client must not be shared by concurrent calls.
//
// With a directory, every mutation is journaled and event data goes to
// segment files in the storage image format; open() replays them.
class EventStore {
 public:
  EventStore(FederationId federation, locks::LockService& locks, const Clock& clock,
             EventStoreConfig config = {});
  ~EventStore();
  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  static Result<std::unique_ptr<EventStore>> open(const std::filesystem::path& dir,
                                                  FederationId federation,
                                                  locks::LockService& locks, const Clock& clock,
                                                  EventStoreConfig config = {});

  const FederationId& federation() const { return federation_; }
  static std::string metadata_resource(const FederationId& fed, std::string_view collection_path);

  Result<CollectionInfo> create_collection(const std::string& path, CollectionKind kind);
  Result<std::uint64_t> append_events(const std::string& path, const std::vector<EventHeader>& headers);
  Result<CollectionInfo> create_skim(const std::string& path, const std::string& source_stream,
                                     const std::vector<std::uint64_t>& ordinals,
                                     const std::string& selection_name = {});
  Result<CollectionInfo> create_skim(const locks::ClientId& client, const std::string& path,
                                     const std::string& source_stream,
                                     const std::vector<std::uint64_t>& ordinals,
                                     const std::string& selection_name = {});
  Result<std::vector<EventHeader>> read_collection(const std::string& path);
  Result<std::vector<EventHeader>> read_collection(const locks::ClientId& client,
                                                   const std::string& path);

  // Creates a stream already holding `events`; either all of it becomes
  // visible or none does.
  Result<CollectionInfo> install_stream(const std::string& path, const std::vector<EventHeader>& events);

  // Removes a collection from the namespace. Skims pointing at a dropped
  // stream become dangling.
  Status drop_collection(const std::string& path);

  // Test backdoor: registers a skim without checking the source or ordinals.
  Result<CollectionInfo> create_skim_unchecked(const std::string& path,
                                               const std::string& source_stream,
                                               const std::vector<std::uint64_t>& ordinals);

  Result<CollectionInfo> info(const std::string& path) const;
  Result<std::vector<EventRef>> pointers(const std::string& path) const;
  Result<EventHeader> dereference(const EventRef& ref) const;
  bool contains(const std::string& path) const;
  std::vector<CollectionInfo> list(const std::string& prefix = "/") const;
  std::size_t collection_count() const;
  TreeShape tree_shape() const;
  // Every skim pointer names this federation and resolves to a stored event.
  Status check_self_contained() const;

  // Observes the create_skim phases in order: "build" (pointer construction),
  // "lock", "mutate", "unlock". Used to check the critical section.
  void set_phase_observer(std::function<void(std::string_view)> fn) { phase_ = std::move(fn); }

 private:
  struct Collection {
    CollectionInfo info;
    mutable std::shared_mutex mu;
    std::vector<EventHeader> events;       // streams
    std::vector<std::uint64_t> ordinals;   // skims
  };

  class MetadataLock;
  // A null client means "open a session just for this call".
  Result<std::unique_ptr<MetadataLock>> lock_metadata(const locks::ClientId* client,
                                                      const std::string& path,
                                                      locks::LockMode mode);
  Result<CollectionInfo> create_skim_as(const locks::ClientId* client, const std::string& path,
                                        const std::string& source_stream,
                                        const std::vector<std::uint64_t>& ordinals,
                                        const std::string& selection_name);
  Result<std::vector<EventHeader>> read_as(const locks::ClientId* client, const std::string& path);
  std::shared_ptr<Collection> find_locked(const std::string& path) const;
  std::shared_ptr<Collection> find(const std::string& path) const;
  Result<CollectionInfo> register_locked(std::shared_ptr<Collection> c);
  Result<std::vector<EventHeader>> materialize(const Collection& c) const;
  void phase(std::string_view name) const {
    if (phase_) phase_(name);
  }

  Status replay(const std::filesystem::path& dir);
  Result<std::string> write_segment(const Bytes& payload);
  Status journal(const std::string& line);

  FederationId federation_;
  locks::LockService& locks_;
  const Clock& clock_;
  EventStoreConfig config_;
  locks::ClientId client_prefix_;
  std::atomic<std::uint64_t> next_session_{1};
  std::function<void(std::string_view)> phase_;

  mutable std::shared_mutex mu_;
  NamespaceTree tree_;
  std::map<CollectionId, std::shared_ptr<Collection>> collections_;
  CollectionId next_id_ = 1;

  // Persistence (absent for in-memory stores).
  std::optional<std::filesystem::path> dir_;
  std::ofstream journal_;
  std::uint64_t next_segment_ = 1;
  std::mutex io_mu_;
};

}  // namespace petastore::events
