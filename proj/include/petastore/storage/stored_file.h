#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "petastore/core/bytes.h"
#include "petastore/core/result.h"
#include "petastore/core/state_id.h"
#include "petastore/storage/codec.h"

namespace petastore::storage {

using FileId = std::uint64_t;

inline constexpr std::uint32_t kDefaultBlockSize = 32 * 1024;

// File image layout, integers big-endian:
//
//   magic(4) | version(1) | codec(1) | block_size(4) | logical_size(8) |
//   index_count(4) | index entries (24 each) | whole-file digest(32) | frames
//
// An index entry is logical_offset(8) | physical_offset(8) |
// compressed_len(4) | crc32(4); physical_offset is absolute within the image
// and the crc covers the compressed frame bytes. The digest is SHA-256 over
// every image byte except the digest field itself.
inline constexpr std::uint32_t kFileMagic = 0x50535446;  // "PSTF"
inline constexpr std::uint8_t kFileVersion = 1;
inline constexpr std::size_t kFileHeaderBytes = 22;
inline constexpr std::size_t kIndexEntryBytes = 24;
inline constexpr std::size_t kDigestBytes = 32;

struct BlockIndexEntry {
  std::uint64_t logical_offset = 0;
  std::uint64_t physical_offset = 0;
  std::uint32_t compressed_len = 0;
  std::uint32_t crc32 = 0;

  bool operator==(const BlockIndexEntry&) const = default;
};

struct FileMeta {
  std::uint8_t codec = 0;
  std::uint32_t block_size = kDefaultBlockSize;
  std::uint64_t logical_size = 0;
  std::vector<BlockIndexEntry> index;
  StateId::Digest digest{};

  std::uint64_t physical_size() const;
  std::uint32_t block_logical_len(std::size_t block_no) const;
  std::size_t block_count() const { return index.size(); }
};

// Parsed file image. `image` holds the bytes exactly as they sit on disk.
struct StoredFile {
  FileId file_id = 0;
  FileMeta meta;
  Bytes image;

  std::uint64_t logical_size() const { return meta.logical_size; }
  std::uint64_t physical_size() const { return image.size(); }
  ByteSpan frame(std::size_t block_no) const;
};

Result<StoredFile> build_stored_file(ByteSpan contents, std::uint8_t codec_id,
                                     std::uint32_t block_size = kDefaultBlockSize,
                                     const CodecRegistry& codecs = CodecRegistry::global());

// Validates structure and the whole-file digest. Structural damage reports
// kMalformed; a digest mismatch reports kChecksumMismatch.
Result<StoredFile> parse_stored_file(Bytes image);

Status write_image_file(const std::filesystem::path& path, const StoredFile& file);
Result<StoredFile> read_image_file(const std::filesystem::path& path);

// What a data server ships for a read: the covering frames, verbatim, plus
// the block metadata the client needs to check and decompress them.
struct BlockFrame {
  std::uint32_t block_no = 0;
  std::uint64_t logical_offset = 0;
  std::uint32_t logical_len = 0;
  std::uint32_t crc32 = 0;
  Bytes payload;

  bool operator==(const BlockFrame&) const = default;
};

struct FrameSet {
  FileId file_id = 0;
  std::uint8_t codec = 0;
  std::uint32_t block_size = 0;
  std::uint64_t logical_size = 0;
  std::vector<BlockFrame> frames;

  bool operator==(const FrameSet&) const = default;
  std::uint64_t payload_bytes() const;
};

// Minimal covering set of frames for [offset, offset + len). len == 0 gives
// an empty set. kRange if the range leaves the file.
Result<FrameSet> select_frames(const StoredFile& file, std::uint64_t offset, std::uint64_t len);

// Verifies every frame checksum, decompresses, and returns exactly the
// requested logical range. Any corruption reports kChecksumMismatch.
Result<Bytes> client_decompress(const FrameSet& frames, std::uint64_t offset, std::uint64_t len,
                                const CodecRegistry& codecs = CodecRegistry::global());

// Wire form of a FrameSet (the DATA payload of the slave protocol).
Bytes encode_frame_set(const FrameSet& fs);
Result<FrameSet> decode_frame_set(ByteSpan bytes);

}  // namespace petastore::storage
