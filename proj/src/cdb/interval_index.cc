#include "petastore/cdb/interval_index.h"

#include <algorithm>
#include <limits>

namespace petastore::cdb {

namespace {
constexpr DetectorTime kMinTime = std::numeric_limits<DetectorTime>::min();
}

bool IndexEntry::before(const IndexEntry& o) const {
  if (inserted_at != o.inserted_at) return inserted_at < o.inserted_at;
  if (*origin_tag != *o.origin_tag) return *origin_tag < *o.origin_tag;
  return origin_seq < o.origin_seq;
}

bool IntervalIndex::insert(const IndexEntry& e) {
  if (entries_.empty() || entries_.back().before(e)) {
    entries_.push_back(e);
    build_completed_blocks(entries_.size());
    return true;
  }
  insert_deferred(e);
  rebuild();
  return false;
}

void IntervalIndex::insert_deferred(const IndexEntry& e) {
  auto pos = std::upper_bound(entries_.begin(), entries_.end(), e,
                              [](const IndexEntry& a, const IndexEntry& b) { return a.before(b); });
  entries_.insert(pos, e);
}

void IntervalIndex::rebuild() {
  levels_.clear();
  for (std::size_t n = kLeaf; n <= entries_.size(); n += kLeaf) build_completed_blocks(n);
}

void IntervalIndex::build_completed_blocks(std::size_t n) {
  if (n % kLeaf != 0) return;
  std::size_t size = kLeaf;
  for (std::size_t level = 0; n % size == 0; ++level, size *= 2) {
    if (levels_.size() <= level) levels_.emplace_back();
    const std::size_t j = n / size - 1;
    if (levels_[level].size() != j) break;  // already built
    if (level == 0) {
      levels_[0].push_back(paint_leaf(n - kLeaf));
    } else {
      const auto& below = levels_[level - 1];
      levels_[level].push_back(overlay(below[2 * j], below[2 * j + 1]));
    }
  }
}

IntervalIndex::Timeline IntervalIndex::paint_leaf(std::size_t first) const {
  Timeline tl;
  tl.begins.push_back(kMinTime);
  tl.slots.push_back(-1);
  for (std::size_t i = first; i < first + kLeaf; ++i) {
    const auto& e = entries_[i];
    Timeline one;
    one.begins = {kMinTime, e.begin, e.end};
    one.slots = {-1, static_cast<std::int32_t>(i), -1};
    if (e.begin == kMinTime) {
      one.begins.erase(one.begins.begin());
      one.slots.erase(one.slots.begin());
    }
    tl = overlay(tl, one);
  }
  return tl;
}

IntervalIndex::Timeline IntervalIndex::overlay(const Timeline& lower, const Timeline& upper) {
  Timeline out;
  out.begins.reserve(lower.begins.size() + upper.begins.size());
  out.slots.reserve(lower.begins.size() + upper.begins.size());
  std::size_t i = 0, j = 0;
  DetectorTime p = kMinTime;
  while (true) {
    const std::int32_t v = upper.slots[j] >= 0 ? upper.slots[j] : lower.slots[i];
    if (out.slots.empty() || out.slots.back() != v) {
      out.begins.push_back(p);
      out.slots.push_back(v);
    }
    const bool more_l = i + 1 < lower.begins.size();
    const bool more_u = j + 1 < upper.begins.size();
    if (!more_l && !more_u) break;
    const DetectorTime nl = more_l ? lower.begins[i + 1] : std::numeric_limits<DetectorTime>::max();
    const DetectorTime nu = more_u ? upper.begins[j + 1] : std::numeric_limits<DetectorTime>::max();
    p = std::min(nl, nu);
    if (more_l && nl == p) ++i;
    if (more_u && nu == p) ++j;
  }
  return out;
}

std::int32_t IntervalIndex::probe(const Timeline& tl, DetectorTime t) {
  auto it = std::upper_bound(tl.begins.begin(), tl.begins.end(), t);
  return tl.slots[static_cast<std::size_t>(it - tl.begins.begin()) - 1];
}

std::optional<std::uint32_t> IntervalIndex::lookup(DetectorTime t, std::int64_t as_of) const {
  // Visible prefix: everything inserted at or before as_of.
  const auto m = static_cast<std::size_t>(
      std::upper_bound(entries_.begin(), entries_.end(), as_of,
                       [](std::int64_t v, const IndexEntry& e) { return v < e.inserted_at; }) -
      entries_.begin());

  // Records past the last whole leaf are scanned directly.
  const std::size_t blocked = m - m % kLeaf;
  for (std::size_t i = m; i > blocked; --i) {
    const auto& e = entries_[i - 1];
    if (e.begin <= t && t < e.end) return e.record;
  }
  // Blocks of the prefix, newest (smallest, rightmost) first.
  std::size_t end = blocked;
  const std::size_t leaves = blocked / kLeaf;
  for (std::size_t level = 0; (leaves >> level) != 0; ++level) {
    if (((leaves >> level) & 1) == 0) continue;
    const std::size_t size = kLeaf << level;
    const std::size_t j = end / size - 1;
    const std::int32_t hit = probe(levels_[level][j], t);
    if (hit >= 0) return entries_[static_cast<std::size_t>(hit)].record;
    end -= size;
  }
  return std::nullopt;
}

std::size_t IntervalIndex::block_segments() const {
  std::size_t n = 0;
  for (const auto& lvl : levels_) {
    for (const auto& tl : lvl) n += tl.begins.size();
  }
  return n;
}

}  // namespace petastore::cdb
