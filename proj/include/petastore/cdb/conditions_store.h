#pragma once

#include <compare>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_set>
#include <vector>

#include "petastore/cdb/interval_index.h"
#include "petastore/core/bytes.h"
#include "petastore/core/result.h"
#include "petastore/core/state_id.h"
#include "petastore/core/time.h"

namespace petastore::cdb {

struct ConditionKey {
  std::string namespace_path;  // e.g. /calib/drift/chamberA
  std::string condition_type;

  auto operator<=>(const ConditionKey&) const = default;
  bool operator==(const ConditionKey&) const = default;
  std::string to_string() const { return namespace_path + "#" + condition_type; }
};

struct PayloadRef {
  std::uint64_t file_id = 0;
  std::uint64_t offset = 0;

  bool operator==(const PayloadRef&) const = default;
};

struct IovRecord {
  ConditionKey key;
  DetectorTime t_begin = 0;
  DetectorTime t_end = 0;  // exclusive
  SimTime inserted_at;
  std::string revision;
  PayloadRef payload;
  // Assigned by the store on insert.
  std::uint64_t seq = 0;
  // Where the record was first inserted; kept across sweeps.
  std::string origin_tag;
  std::uint64_t origin_seq = 0;

  bool same_identity(const IovRecord& o) const {
    return key == o.key && revision == o.revision && t_begin == o.t_begin && t_end == o.t_end &&
           inserted_at == o.inserted_at && origin_tag == o.origin_tag &&
           origin_seq == o.origin_seq;
  }
};

struct ConfigurationRecord {
  std::string name;
  std::map<std::string, std::string> bindings;  // namespace prefix -> revision
  SimTime insertion_cutoff;
  StateId state;
};

// Bi-temporal conditions store: lookups by validity time and insertion time
// within a revision, persistent configurations, sweeps and subset extraction.
//
// Inserts and sweeps take the store exclusively; lookups share it.
class ConditionsStore {
 public:
  explicit ConditionsStore(std::string origin_tag);
  ~ConditionsStore();
  ConditionsStore(const ConditionsStore&) = delete;
  ConditionsStore& operator=(const ConditionsStore&) = delete;

  const std::string& origin_tag() const { return origin_tag_; }

  PayloadRef put_payload(ByteSpan bytes);
  Result<Bytes> payload(PayloadRef ref) const;
  std::uint64_t payload_bytes() const;

  // Fills seq/origin fields. inserted_at may not go backwards.
  Result<std::uint64_t> insert(IovRecord rec);
  Result<std::uint64_t> insert(const ConditionKey& key, DetectorTime t_begin, DetectorTime t_end,
                               SimTime inserted_at, const std::string& revision, ByteSpan payload);

  Result<IovRecord> lookup_record(const ConditionKey& key, DetectorTime t, SimTime as_of,
                                  const std::string& revision) const;
  Result<PayloadRef> lookup(const ConditionKey& key, DetectorTime t, SimTime as_of,
                            const std::string& revision) const;

  Result<ConfigurationRecord> make_config(const std::string& name,
                                          const std::map<std::string, std::string>& bindings,
                                          SimTime insertion_cutoff);
  Result<ConfigurationRecord> config(const std::string& name) const;
  std::vector<ConfigurationRecord> configs() const;
  Result<IovRecord> lookup_config_record(const ConditionKey& key, DetectorTime t,
                                         const std::string& config_name) const;
  Result<PayloadRef> lookup_config(const ConditionKey& key, DetectorTime t,
                                   const std::string& config_name) const;

  // Copies every source record the target lacks (with its payload) and any
  // configuration the target does not have by name. Returns records merged.
  static std::uint64_t sweep(const ConditionsStore& source, ConditionsStore& target);

  // Self-contained store that answers lookup_config(name) like this one for
  // keys accepted by `predicate`.
  Result<std::unique_ptr<ConditionsStore>> extract_subset(
      const std::function<bool(const ConditionKey&)>& predicate, const std::string& config_name,
      std::string origin_tag) const;

  std::size_t record_count() const;
  std::vector<IovRecord> records() const;
  std::vector<ConditionKey> keys() const;
  SimTime last_inserted_at() const;

  Status save(const std::filesystem::path& dir) const;
  static Result<std::unique_ptr<ConditionsStore>> load(const std::filesystem::path& dir);

 private:
  struct IndexKey {
    ConditionKey key;
    std::string revision;
    auto operator<=>(const IndexKey&) const = default;
  };
  struct Identity {
    std::string origin_tag;
    std::uint64_t origin_seq;
    auto operator<=>(const Identity&) const = default;
  };

  const std::string* intern(const std::string& s);
  Status validate(const IovRecord& rec) const;
  // Appends to the record table and index; `defer` skips block maintenance.
  std::uint64_t add_locked(IovRecord rec, bool defer, std::set<IntervalIndex*>* dirty);
  Result<IovRecord> lookup_locked(const ConditionKey& key, DetectorTime t, SimTime as_of,
                                  const std::string& revision) const;
  Result<std::string> bound_revision_locked(const ConfigurationRecord& cfg,
                                            const ConditionKey& key) const;
  PayloadRef put_payload_locked(ByteSpan bytes);
  Result<Bytes> payload_locked(PayloadRef ref) const;
  Status insert_config_locked(const ConfigurationRecord& cfg);

  std::string origin_tag_;
  mutable std::shared_mutex mu_;
  std::unordered_set<std::string> strings_;
  std::vector<IovRecord> records_;  // records_[seq - 1]
  std::map<IndexKey, IntervalIndex> indexes_;
  std::set<Identity> identities_;
  std::map<std::string, ConfigurationRecord> configs_;
  SimTime last_local_insert_ = kSimEpoch;
  bool any_local_insert_ = false;

  // Payload segments; file_id = position + 1.
  std::vector<Bytes> segments_;
  std::uint64_t payload_bytes_ = 0;
};

}  // namespace petastore::cdb
