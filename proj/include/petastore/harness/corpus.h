#pragma once

#include <cstdint>

#include "petastore/core/bytes.h"

namespace petastore::harness {

inline constexpr std::size_t kEventRecordBytes = 256;

// Seeded stand-in for reconstructed event data: fixed-size records carrying
// an event id, run number, quantized track kinematics, a sparse calorimeter
// and mostly constant trigger words. Record i depends only on (seed, run,
// first_event + i), so any slice can be regenerated independently.
Bytes synthetic_events(std::uint64_t seed, std::uint32_t run, std::uint64_t first_event,
                       std::size_t count);

}  // namespace petastore::harness
