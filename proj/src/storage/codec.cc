#include "petastore/storage/codec.h"

#include <zlib.h>

namespace petastore::storage {
namespace {

class NoneCodec final : public Codec {
 public:
  std::uint8_t id() const override { return static_cast<std::uint8_t>(CodecId::kNone); }
  std::string_view name() const override { return "NONE"; }
  Bytes compress(ByteSpan block) const override { return Bytes(block.begin(), block.end()); }
  Result<Bytes> decompress(ByteSpan frame, std::size_t logical_len) const override {
    if (frame.size() != logical_len) return Error(ErrorCode::kMalformed, "stored frame length");
    return Bytes(frame.begin(), frame.end());
  }
};

// Deflate at a fixed level. zlib output is a pure function of input and
// parameters, which keeps digests stable across runs.
class DeflateCodec final : public Codec {
 public:
  std::uint8_t id() const override { return static_cast<std::uint8_t>(CodecId::kReferenceLz); }
  std::string_view name() const override { return "REFERENCE_LZ"; }

  Bytes compress(ByteSpan block) const override {
    uLongf bound = compressBound(static_cast<uLong>(block.size()));
    Bytes out(bound);
    int rc = compress2(out.data(), &bound, block.data(), static_cast<uLong>(block.size()), 6);
    if (rc != Z_OK) return Bytes(block.begin(), block.end());  // unreachable with a bound-sized buffer
    out.resize(bound);
    return out;
  }

  Result<Bytes> decompress(ByteSpan frame, std::size_t logical_len) const override {
    Bytes out(logical_len);
    uLongf len = static_cast<uLongf>(logical_len);
    int rc = uncompress(out.data(), &len, frame.data(), static_cast<uLong>(frame.size()));
    if (rc != Z_OK || len != logical_len) {
      return Error(ErrorCode::kMalformed, "deflate frame did not decode to block length");
    }
    return out;
  }
};

}  // namespace

std::string_view to_string(CodecId id) {
  switch (id) {
    case CodecId::kNone:
      return "NONE";
    case CodecId::kReferenceLz:
      return "REFERENCE_LZ";
  }
  return "UNKNOWN";
}

CodecRegistry::CodecRegistry() {
  add(std::make_shared<NoneCodec>());
  add(std::make_shared<DeflateCodec>());
}

CodecRegistry& CodecRegistry::global() {
  static CodecRegistry registry;
  return registry;
}

void CodecRegistry::add(std::shared_ptr<const Codec> codec) {
  std::lock_guard lock(mu_);
  codecs_[codec->id()] = std::move(codec);
}

const Codec* CodecRegistry::find(std::uint8_t id) const {
  std::lock_guard lock(mu_);
  auto it = codecs_.find(id);
  return it == codecs_.end() ? nullptr : it->second.get();
}

std::uint32_t crc32(ByteSpan data) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), data.data(), static_cast<uInt>(data.size())));
}

}  // namespace petastore::storage
