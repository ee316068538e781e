#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace petastore::events {

using CollectionId = std::uint64_t;

struct TreeShape {
  std::size_t nodes = 0;
  std::size_t max_entries = 0;
  std::size_t max_depth = 0;
};

// Hierarchical name -> collection map where no node ever holds more than
// `node_limit` entries. A directory that would overflow is turned into a
// set of hash buckets (at most min(16, node_limit) of them), and buckets
// split again with a different salt when they fill up.
//
// Not thread-safe; EventStore guards it.
class NamespaceTree {
 public:
  explicit NamespaceTree(std::size_t node_limit);
  ~NamespaceTree();
  NamespaceTree(const NamespaceTree&) = delete;
  NamespaceTree& operator=(const NamespaceTree&) = delete;

  std::size_t node_limit() const { return node_limit_; }
  std::size_t fan_out() const { return fan_out_; }

  // False when the path already names a collection.
  bool insert(const std::vector<std::string>& segments, CollectionId id);
  std::optional<CollectionId> find(const std::vector<std::string>& segments) const;
  bool erase(const std::vector<std::string>& segments);

  // Walks the tree (not a side index) and reports every collection.
  void for_each(const std::function<void(const std::string& path, CollectionId)>& fn) const;
  TreeShape shape() const;
  std::size_t size() const { return size_; }

 private:
  struct Node;
  struct Entry;

  Entry* slot(Node* dir, const std::string& seg, bool create);
  const Entry* slot(const Node* dir, const std::string& seg) const;
  void split(Node* n);
  std::size_t bucket_of(const std::string& seg, int level) const;

  std::size_t node_limit_;
  std::size_t fan_out_;
  std::unique_ptr<Node> root_;
  std::size_t size_ = 0;
};

}  // namespace petastore::events
