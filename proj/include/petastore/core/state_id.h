#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "petastore/core/result.h"
#include "petastore/core/time.h"

namespace petastore {

// 256-bit digest identifying a conditions configuration state.
class StateId {
 public:
  using Digest = std::array<std::uint8_t, 32>;

  StateId() = default;
  explicit StateId(const Digest& d) : digest_(d) {}

  const Digest& digest() const { return digest_; }
  std::string to_hex() const;
  static Result<StateId> from_hex(std::string_view hex);

  auto operator<=>(const StateId&) const = default;

 private:
  Digest digest_{};
};

struct RevisionBinding {
  std::string namespace_prefix;
  std::string revision;

  auto operator<=>(const RevisionBinding&) const = default;
};

// Bindings must be strictly increasing by namespace_prefix
// (kUnsortedBindings otherwise).
Result<StateId> compute_state_id(std::string_view configuration_name, SimTime insertion_cutoff,
                                 const std::vector<RevisionBinding>& bindings);

// SHA-256 helper shared with the storage engine's whole-file digest.
StateId::Digest sha256(std::span<const std::uint8_t> data);

}  // namespace petastore
