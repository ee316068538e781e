#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace petastore::cdb {

using DetectorTime = std::int64_t;

// One record as seen by the index. Records are ordered by
// (inserted_at, origin_tag, origin_seq); a higher record shadows a lower one
// wherever their validity intervals overlap.
struct IndexEntry {
  std::int64_t inserted_at = 0;
  const std::string* origin_tag = nullptr;  // interned, compared by value
  std::uint64_t origin_seq = 0;
  DetectorTime begin = 0;
  DetectorTime end = 0;  // exclusive
  std::uint32_t record = 0;  // caller's handle

  bool before(const IndexEntry& o) const;
};

// Shadowing index over the records of one (key, revision).
//
// Records are kept in priority order. Aligned blocks of 8 * 2^L records
// carry a "painted" timeline: the validity line split into segments, each
// naming the highest record of the block covering it (or none). A lookup
// as of some insertion time covers the visible prefix with O(log n) blocks
// and probes them from newest to oldest, so it costs O(log^2 n). Appending
// in priority order builds each block once (amortized O(log n)); an
// out-of-order insert rebuilds the whole index.
class IntervalIndex {
 public:
  // Returns true when the entry landed at the end (no rebuild needed).
  bool insert(const IndexEntry& e);
  // Inserts without maintaining blocks; call rebuild() afterwards.
  void insert_deferred(const IndexEntry& e);
  void rebuild();

  // Highest-priority record with inserted_at <= as_of whose interval
  // contains t.
  std::optional<std::uint32_t> lookup(DetectorTime t, std::int64_t as_of) const;

  std::size_t size() const { return entries_.size(); }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  std::size_t block_segments() const;

 private:
  struct Timeline {
    std::vector<DetectorTime> begins;
    std::vector<std::int32_t> slots;  // position in entries_, -1 for a gap
  };

  static constexpr std::size_t kLeaf = 8;

  void build_completed_blocks(std::size_t n);
  Timeline paint_leaf(std::size_t first) const;
  static Timeline overlay(const Timeline& lower, const Timeline& upper);
  static std::int32_t probe(const Timeline& tl, DetectorTime t);

  std::vector<IndexEntry> entries_;
  std::vector<std::vector<Timeline>> levels_;  // levels_[L][j] covers block j of size 8*2^L
};

}  // namespace petastore::cdb
