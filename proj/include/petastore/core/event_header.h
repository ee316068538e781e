#pragma once

#include <cstddef>
#include <cstdint>

#include "petastore/core/bytes.h"
#include "petastore/core/result.h"
#include "petastore/core/types.h"

namespace petastore {

// Compact event-header wire layout, all integers big-endian:
//
//   magic(2) | version(1) | event_id(8) | run(4) | component bitmap(1)
//   then for each present component, in kind-code order:
//   kind code(1) | file_id(8) | offset(8) | length(4)
inline constexpr std::uint16_t kEventHeaderMagic = 0xEB48;
inline constexpr std::uint8_t kEventHeaderVersion = 1;
inline constexpr std::size_t kEventHeaderFixedBytes = 16;
inline constexpr std::size_t kEventHeaderLocatorBytes = 21;
inline constexpr std::size_t kEventHeaderMaxBytes = 512;

constexpr std::size_t encoded_event_header_size(std::size_t component_count) {
  return kEventHeaderFixedBytes + component_count * kEventHeaderLocatorBytes;
}

Bytes encode_event_header(const EventHeader& h);
void encode_event_header(const EventHeader& h, Bytes* out);

// Returns kMalformed on bad magic/version, truncation, trailing bytes or a
// locator whose kind code disagrees with the bitmap.
Result<EventHeader> decode_event_header(ByteSpan bytes);

}  // namespace petastore
