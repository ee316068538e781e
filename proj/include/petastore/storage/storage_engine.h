#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "petastore/core/time.h"
#include "petastore/storage/stored_file.h"

namespace petastore::storage {

// Fetch latency = base + physical size * seconds_per_gib.
struct TertiaryLatency {
  SimDuration base = seconds(1.0);
  double seconds_per_gib = 2.0;
};

// Archival tier. Every file written anywhere lands here; contents never
// change once archived.
class TertiaryStore {
 public:
  explicit TertiaryStore(TertiaryLatency latency = {}) : latency_(latency) {}

  FileId archive(StoredFile file);
  bool contains(FileId id) const;
  std::shared_ptr<const StoredFile> get(FileId id) const;
  std::vector<FileId> ids() const;

  SimDuration fetch_latency(std::uint64_t bytes) const;
  const TertiaryLatency& latency() const { return latency_; }

 private:
  TertiaryLatency latency_;
  mutable std::mutex mu_;
  FileId next_id_ = 1;
  std::map<FileId, std::shared_ptr<const StoredFile>> files_;
};

struct Staging {
  std::shared_ptr<const StoredFile> file;
  SimTime completion;
};

// One data server's disk: resident files plus in-flight stagings from
// tertiary. A staged file becomes resident once the clock passes its
// completion time.
class StorageEngine {
 public:
  StorageEngine(std::string name, TertiaryStore& tertiary, const Clock& clock,
                std::uint32_t block_size = kDefaultBlockSize,
                const CodecRegistry& codecs = CodecRegistry::global());

  const std::string& name() const { return name_; }

  // Blocks the file, archives it to tertiary and keeps a resident copy.
  Result<std::shared_ptr<const StoredFile>> put_file(ByteSpan contents, std::uint8_t codec);

  // Server side of a read: ships frames verbatim, never decompresses.
  Result<FrameSet> read_blocks(FileId id, std::uint64_t offset, std::uint64_t len);

  // Concurrent fetches of one file share a single staging and completion time.
  // A resident file is re-staged, which is how corrupted copies get replaced.
  Result<Staging> fetch_from_tertiary(FileId id, SimTime now);
  std::optional<SimTime> staging_completion(FileId id) const;

  // Test-only fault: garbles one block of the resident copy. Non-resident
  // files or out-of-range blocks are ignored.
  void inject_torn_write(FileId id, std::uint32_t block_no);

  // Copies a file in directly (replication from a peer).
  void install(std::shared_ptr<const StoredFile> file);
  bool evict(FileId id);
  bool is_resident(FileId id) const;
  std::shared_ptr<const StoredFile> resident(FileId id) const;
  std::vector<FileId> resident_files() const;
  std::uint64_t disk_used() const;

 private:
  void settle_locked(SimTime now) const;

  std::string name_;
  TertiaryStore& tertiary_;
  const Clock& clock_;
  std::uint32_t block_size_;
  const CodecRegistry& codecs_;

  mutable std::mutex mu_;
  mutable std::map<FileId, std::shared_ptr<const StoredFile>> resident_;
  mutable std::map<FileId, Staging> staging_;
};

}  // namespace petastore::storage
