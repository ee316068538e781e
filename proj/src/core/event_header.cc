#include "petastore/core/event_header.h"

namespace petastore {

void encode_event_header(const EventHeader& h, Bytes* out) {
  out->reserve(out->size() + encoded_event_header_size(h.component_count()));
  ByteWriter w(out);
  w.u16(kEventHeaderMagic);
  w.u8(kEventHeaderVersion);
  w.u64(h.event_id);
  w.u32(h.run_number);
  std::uint8_t bitmap = 0;
  for (std::size_t i = 0; i < kComponentKindCount; ++i) {
    if (h.components[i]) bitmap |= static_cast<std::uint8_t>(1u << i);
  }
  w.u8(bitmap);
  for (std::size_t i = 0; i < kComponentKindCount; ++i) {
    const auto& loc = h.components[i];
    if (!loc) continue;
    w.u8(static_cast<std::uint8_t>(i));
    w.u64(loc->file_id);
    w.u64(loc->offset);
    w.u32(loc->length);
  }
}

Bytes encode_event_header(const EventHeader& h) {
  Bytes out;
  encode_event_header(h, &out);
  return out;
}

Result<EventHeader> decode_event_header(ByteSpan bytes) {
  ByteReader r(bytes);
  std::uint16_t magic;
  std::uint8_t version;
  std::uint8_t bitmap;
  EventHeader h;
  if (!r.u16(&magic) || magic != kEventHeaderMagic) {
    return Error(ErrorCode::kMalformed, "bad event header magic");
  }
  if (!r.u8(&version) || version != kEventHeaderVersion) {
    return Error(ErrorCode::kMalformed, "unsupported event header version");
  }
  if (!r.u64(&h.event_id) || !r.u32(&h.run_number) || !r.u8(&bitmap)) {
    return Error(ErrorCode::kMalformed, "truncated event header");
  }
  const auto present = static_cast<std::size_t>(__builtin_popcount(bitmap));
  if (bytes.size() != encoded_event_header_size(present)) {
    return Error(ErrorCode::kMalformed, "event header length disagrees with bitmap");
  }
  for (std::size_t i = 0; i < kComponentKindCount; ++i) {
    if (!(bitmap & (1u << i))) continue;
    std::uint8_t code;
    ComponentLocator loc;
    if (!r.u8(&code) || !r.u64(&loc.file_id) || !r.u64(&loc.offset) || !r.u32(&loc.length)) {
      return Error(ErrorCode::kMalformed, "truncated locator");
    }
    if (code != i) return Error(ErrorCode::kMalformed, "locator kind code out of order");
    h.components[i] = loc;
  }
  return h;
}

}  // namespace petastore
