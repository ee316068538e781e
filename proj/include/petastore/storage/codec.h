#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string_view>

#include "petastore/core/bytes.h"
#include "petastore/core/result.h"

namespace petastore::storage {

// Built-in codec ids as stored in the file header's codec byte.
enum class CodecId : std::uint8_t {
  kNone = 0,
  kReferenceLz = 1,
};

std::string_view to_string(CodecId id);

// Block compression codec. Implementations must be deterministic: equal input
// yields equal output, so file digests are reproducible.
class Codec {
 public:
  virtual ~Codec() = default;
  virtual std::uint8_t id() const = 0;
  virtual std::string_view name() const = 0;
  virtual Bytes compress(ByteSpan block) const = 0;
  // `logical_len` is the exact decompressed size recorded in the block index.
  virtual Result<Bytes> decompress(ByteSpan frame, std::size_t logical_len) const = 0;
};

class CodecRegistry {
 public:
  // Preloaded with NONE and REFERENCE_LZ.
  CodecRegistry();
  CodecRegistry(const CodecRegistry&) = delete;
  CodecRegistry& operator=(const CodecRegistry&) = delete;

  // Process-wide registry used when callers do not supply one.
  static CodecRegistry& global();

  void add(std::shared_ptr<const Codec> codec);
  const Codec* find(std::uint8_t id) const;

 private:
  mutable std::mutex mu_;
  std::map<std::uint8_t, std::shared_ptr<const Codec>> codecs_;
};

std::uint32_t crc32(ByteSpan data);

}  // namespace petastore::storage
