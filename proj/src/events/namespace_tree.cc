#include "petastore/events/namespace_tree.h"

#include <algorithm>
#include <cassert>

namespace petastore::events {

struct NamespaceTree::Entry {
  std::unique_ptr<Node> child;  // sub-directory, if any
  std::optional<CollectionId> collection;
};

struct NamespaceTree::Node {
  explicit Node(int lvl) : level(lvl) {}

  int level;  // 0 for a directory root, +1 per bucket split below it
  std::map<std::string, Entry> entries;
  std::vector<std::unique_ptr<Node>> buckets;  // non-empty once split

  bool is_split() const { return !buckets.empty(); }
  std::size_t entry_count() const {
    if (!is_split()) return entries.size();
    return static_cast<std::size_t>(
        std::count_if(buckets.begin(), buckets.end(), [](const auto& b) { return b != nullptr; }));
  }
};

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

NamespaceTree::NamespaceTree(std::size_t node_limit)
    : node_limit_(std::max<std::size_t>(node_limit, 2)),
      fan_out_(std::min<std::size_t>(16, node_limit_)),
      root_(std::make_unique<Node>(0)) {}

NamespaceTree::~NamespaceTree() = default;

std::size_t NamespaceTree::bucket_of(const std::string& seg, int level) const {
  return mix(fnv1a(seg) ^ (0x5851f42d4c957f2dull * static_cast<std::uint64_t>(level + 1))) %
         fan_out_;
}

void NamespaceTree::split(Node* n) {
  assert(!n->is_split());
  n->buckets.resize(fan_out_);
  auto old = std::move(n->entries);
  n->entries.clear();
  for (auto& [seg, entry] : old) {
    auto& b = n->buckets[bucket_of(seg, n->level)];
    if (!b) b = std::make_unique<Node>(n->level + 1);
    b->entries.emplace(seg, std::move(entry));
  }
}

NamespaceTree::Entry* NamespaceTree::slot(Node* dir, const std::string& seg, bool create) {
  Node* n = dir;
  while (true) {
    if (n->is_split()) {
      auto& b = n->buckets[bucket_of(seg, n->level)];
      if (!b) {
        if (!create) return nullptr;
        b = std::make_unique<Node>(n->level + 1);
      }
      n = b.get();
      continue;
    }
    auto it = n->entries.find(seg);
    if (it != n->entries.end()) return &it->second;
    if (!create) return nullptr;
    if (n->entries.size() >= node_limit_) {
      split(n);
      continue;
    }
    return &n->entries[seg];
  }
}

const NamespaceTree::Entry* NamespaceTree::slot(const Node* dir, const std::string& seg) const {
  const Node* n = dir;
  while (n->is_split()) {
    const auto& b = n->buckets[bucket_of(seg, n->level)];
    if (!b) return nullptr;
    n = b.get();
  }
  auto it = n->entries.find(seg);
  return it == n->entries.end() ? nullptr : &it->second;
}

bool NamespaceTree::insert(const std::vector<std::string>& segments, CollectionId id) {
  if (segments.empty()) return false;
  Node* dir = root_.get();
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    Entry* e = slot(dir, segments[i], true);
    if (!e->child) e->child = std::make_unique<Node>(0);
    dir = e->child.get();
  }
  Entry* e = slot(dir, segments.back(), true);
  if (e->collection) return false;
  e->collection = id;
  ++size_;
  return true;
}

std::optional<CollectionId> NamespaceTree::find(const std::vector<std::string>& segments) const {
  if (segments.empty()) return std::nullopt;
  const Node* dir = root_.get();
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    const Entry* e = slot(dir, segments[i]);
    if (!e || !e->child) return std::nullopt;
    dir = e->child.get();
  }
  const Entry* e = slot(dir, segments.back());
  if (!e) return std::nullopt;
  return e->collection;
}

bool NamespaceTree::erase(const std::vector<std::string>& segments) {
  if (segments.empty()) return false;
  Node* dir = root_.get();
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    Entry* e = slot(dir, segments[i], false);
    if (!e || !e->child) return false;
    dir = e->child.get();
  }
  Entry* e = slot(dir, segments.back(), false);
  if (!e || !e->collection) return false;
  // The entry itself stays (possibly empty); entry counts only shrink.
  e->collection.reset();
  --size_;
  return true;
}

void NamespaceTree::for_each(
    const std::function<void(const std::string&, CollectionId)>& fn) const {
  std::function<void(const Node*, const std::string&)> walk = [&](const Node* n,
                                                                  const std::string& prefix) {
    if (n->is_split()) {
      for (const auto& b : n->buckets) {
        if (b) walk(b.get(), prefix);
      }
      return;
    }
    for (const auto& [seg, e] : n->entries) {
      const std::string path = prefix + "/" + seg;
      if (e.collection) fn(path, *e.collection);
      if (e.child) walk(e.child.get(), path);
    }
  };
  walk(root_.get(), "");
}

TreeShape NamespaceTree::shape() const {
  TreeShape s;
  std::function<void(const Node*, std::size_t)> walk = [&](const Node* n, std::size_t depth) {
    ++s.nodes;
    s.max_entries = std::max(s.max_entries, n->entry_count());
    s.max_depth = std::max(s.max_depth, depth);
    if (n->is_split()) {
      for (const auto& b : n->buckets) {
        if (b) walk(b.get(), depth + 1);
      }
      return;
    }
    for (const auto& [seg, e] : n->entries) {
      if (e.child) walk(e.child.get(), depth + 1);
    }
  };
  walk(root_.get(), 0);
  return s;
}

}  // namespace petastore::events
