#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "petastore/core/result.h"

namespace petastore {

enum class DataClass : std::uint8_t { kReal, kSim };

std::string_view to_string(DataClass c);
bool parse_data_class(std::string_view text, DataClass* out);

// A federation is addressed by its run label and whether it holds real or
// simulated data, e.g. "run3:REAL".
struct FederationId {
  std::string run_label;
  DataClass data_class = DataClass::kReal;

  static Result<FederationId> make(std::string run_label, DataClass data_class);
  static Result<FederationId> parse(std::string_view text);
  std::string to_string() const;

  auto operator<=>(const FederationId&) const = default;
  bool operator==(const FederationId&) const = default;
};

// Event components; the numeric value is the 3-bit wire code.
enum class ComponentKind : std::uint8_t {
  kCol = 0,
  kEvt = 1,
  kEvshdr = 2,
  kTag = 3,
  kAod = 4,
  kEsd = 5,
  kRaw = 6,
  kRec = 7,
};

inline constexpr std::size_t kComponentKindCount = 8;
inline constexpr std::array<ComponentKind, kComponentKindCount> kAllComponentKinds = {
    ComponentKind::kCol, ComponentKind::kEvt, ComponentKind::kEvshdr, ComponentKind::kTag,
    ComponentKind::kAod, ComponentKind::kEsd, ComponentKind::kRaw,    ComponentKind::kRec,
};

std::string_view to_string(ComponentKind k);

struct ComponentLocator {
  std::uint64_t file_id = 0;
  std::uint64_t offset = 0;
  std::uint32_t length = 0;

  bool operator==(const ComponentLocator&) const = default;
};

struct EventHeader {
  std::uint64_t event_id = 0;
  std::uint32_t run_number = 0;
  std::array<std::optional<ComponentLocator>, kComponentKindCount> components{};

  const std::optional<ComponentLocator>& component(ComponentKind k) const {
    return components[static_cast<std::size_t>(k)];
  }
  void set_component(ComponentKind k, ComponentLocator loc) {
    components[static_cast<std::size_t>(k)] = loc;
  }
  std::size_t component_count() const;

  bool operator==(const EventHeader&) const = default;
};

enum class CollectionKind : std::uint8_t { kStream, kSkim };

std::string_view to_string(CollectionKind k);
bool parse_collection_kind(std::string_view text, CollectionKind* out);

// Pointer payload of a skim collection.
struct EventRef {
  FederationId federation;
  std::string collection_path;
  std::uint64_t ordinal = 0;

  bool operator==(const EventRef&) const = default;
};

}  // namespace petastore

template <>
struct std::hash<petastore::FederationId> {
  std::size_t operator()(const petastore::FederationId& id) const noexcept {
    return std::hash<std::string>()(id.run_label) * 31 + static_cast<std::size_t>(id.data_class);
  }
};
