#pragma once

#include <random>

#include "petastore/core/bytes.h"
#include "petastore/core/types.h"

namespace petastore::testing_util {

inline EventHeader random_header(std::mt19937_64& rng) {
  EventHeader h;
  h.event_id = rng();
  h.run_number = static_cast<std::uint32_t>(rng());
  const auto mask = rng() & 0xFF;
  for (std::size_t i = 0; i < kComponentKindCount; ++i) {
    if (mask & (1u << i)) {
      h.components[i] = ComponentLocator{rng(), rng(), static_cast<std::uint32_t>(rng())};
    }
  }
  return h;
}

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

}  // namespace petastore::testing_util
