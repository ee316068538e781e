#include "petastore/storage/stored_file.h"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>

namespace petastore::storage {
namespace {

std::size_t digest_position(std::size_t index_count) {
  return kFileHeaderBytes + index_count * kIndexEntryBytes;
}

// SHA-256 over the image with the digest field skipped.
StateId::Digest image_digest(ByteSpan image, std::size_t digest_pos) {
  StateId::Digest d{};
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx.get(), image.data(), digest_pos);
  const std::size_t frames_pos = digest_pos + kDigestBytes;
  EVP_DigestUpdate(ctx.get(), image.data() + frames_pos, image.size() - frames_pos);
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), d.data(), &len);
  return d;
}

std::uint64_t block_count_for(std::uint64_t logical_size, std::uint32_t block_size) {
  return (logical_size + block_size - 1) / block_size;
}

std::uint32_t expected_block_len(std::uint64_t logical_size, std::uint32_t block_size,
                                 std::uint64_t block_no) {
  const std::uint64_t start = block_no * block_size;
  if (start >= logical_size) return 0;
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(block_size, logical_size - start));
}

Error corrupt(const char* what) { return Error(ErrorCode::kChecksumMismatch, what); }

}  // namespace

std::uint64_t FileMeta::physical_size() const {
  std::uint64_t total = digest_position(index.size()) + kDigestBytes;
  for (const auto& e : index) total += e.compressed_len;
  return total;
}

std::uint32_t FileMeta::block_logical_len(std::size_t block_no) const {
  return expected_block_len(logical_size, block_size, block_no);
}

ByteSpan StoredFile::frame(std::size_t block_no) const {
  const auto& e = meta.index.at(block_no);
  return ByteSpan(image).subspan(e.physical_offset, e.compressed_len);
}

std::uint64_t FrameSet::payload_bytes() const {
  std::uint64_t n = 0;
  for (const auto& f : frames) n += f.payload.size();
  return n;
}

Result<StoredFile> build_stored_file(ByteSpan contents, std::uint8_t codec_id,
                                     std::uint32_t block_size, const CodecRegistry& codecs) {
  if (contents.empty()) return Error(ErrorCode::kInvalidArgument, "empty file");
  if (block_size == 0) return Error(ErrorCode::kInvalidArgument, "zero block size");
  const Codec* codec = codecs.find(codec_id);
  if (codec == nullptr) return Error(ErrorCode::kCodecUnavailable, std::to_string(codec_id));

  StoredFile f;
  f.meta.codec = codec_id;
  f.meta.block_size = block_size;
  f.meta.logical_size = contents.size();
  const std::uint64_t n_blocks = block_count_for(contents.size(), block_size);

  std::vector<Bytes> frames;
  frames.reserve(n_blocks);
  std::uint64_t physical = digest_position(n_blocks) + kDigestBytes;
  for (std::uint64_t b = 0; b < n_blocks; ++b) {
    const std::uint64_t off = b * block_size;
    auto block = contents.subspan(off, expected_block_len(contents.size(), block_size, b));
    frames.push_back(codec->compress(block));
    const Bytes& fr = frames.back();
    f.meta.index.push_back(
        {off, physical, static_cast<std::uint32_t>(fr.size()), crc32(fr)});
    physical += fr.size();
  }

  Bytes& img = f.image;
  img.reserve(physical);
  ByteWriter w(&img);
  w.u32(kFileMagic);
  w.u8(kFileVersion);
  w.u8(codec_id);
  w.u32(block_size);
  w.u64(f.meta.logical_size);
  w.u32(static_cast<std::uint32_t>(n_blocks));
  for (const auto& e : f.meta.index) {
    w.u64(e.logical_offset);
    w.u64(e.physical_offset);
    w.u32(e.compressed_len);
    w.u32(e.crc32);
  }
  const std::size_t digest_pos = img.size();
  img.resize(img.size() + kDigestBytes);
  for (const auto& fr : frames) w.raw(fr);
  f.meta.digest = image_digest(img, digest_pos);
  std::copy(f.meta.digest.begin(), f.meta.digest.end(), img.begin() + digest_pos);
  return f;
}

Result<StoredFile> parse_stored_file(Bytes image) {
  StoredFile f;
  ByteReader r(image);
  std::uint32_t magic;
  std::uint8_t version;
  std::uint32_t count;
  if (!r.u32(&magic) || magic != kFileMagic) return Error(ErrorCode::kMalformed, "bad file magic");
  if (!r.u8(&version) || version != kFileVersion) {
    return Error(ErrorCode::kMalformed, "unsupported file version");
  }
  if (!r.u8(&f.meta.codec) || !r.u32(&f.meta.block_size) || !r.u64(&f.meta.logical_size) ||
      !r.u32(&count)) {
    return Error(ErrorCode::kMalformed, "truncated file header");
  }
  if (f.meta.block_size == 0 ||
      count != block_count_for(f.meta.logical_size, f.meta.block_size)) {
    return Error(ErrorCode::kMalformed, "block index does not tile the file");
  }
  if (image.size() < digest_position(count) + kDigestBytes) {
    return Error(ErrorCode::kMalformed, "truncated block index");
  }
  std::uint64_t expect_physical = digest_position(count) + kDigestBytes;
  f.meta.index.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto& e = f.meta.index[i];
    r.u64(&e.logical_offset);
    r.u64(&e.physical_offset);
    r.u32(&e.compressed_len);
    r.u32(&e.crc32);
    if (e.logical_offset != static_cast<std::uint64_t>(i) * f.meta.block_size ||
        e.physical_offset != expect_physical) {
      return Error(ErrorCode::kMalformed, "block index entry out of place");
    }
    expect_physical += e.compressed_len;
  }
  if (expect_physical != image.size()) {
    return Error(ErrorCode::kMalformed, "frames do not fill the image");
  }
  ByteSpan stored_digest;
  r.raw(kDigestBytes, &stored_digest);
  std::copy(stored_digest.begin(), stored_digest.end(), f.meta.digest.begin());
  if (image_digest(image, digest_position(count)) != f.meta.digest) {
    return corrupt("whole-file digest mismatch");
  }
  f.image = std::move(image);
  return f;
}

Result<FrameSet> select_frames(const StoredFile& file, std::uint64_t offset, std::uint64_t len) {
  const auto& m = file.meta;
  if (offset > m.logical_size || len > m.logical_size - offset) {
    return Error(ErrorCode::kRange, "read past end of file");
  }
  FrameSet fs{file.file_id, m.codec, m.block_size, m.logical_size, {}};
  if (len == 0) return fs;
  const std::uint64_t first = offset / m.block_size;
  const std::uint64_t last = (offset + len - 1) / m.block_size;
  for (std::uint64_t b = first; b <= last; ++b) {
    const auto& e = m.index[b];
    auto payload = file.frame(b);
    fs.frames.push_back({static_cast<std::uint32_t>(b), e.logical_offset, m.block_logical_len(b),
                         e.crc32, Bytes(payload.begin(), payload.end())});
  }
  return fs;
}

Result<Bytes> client_decompress(const FrameSet& fs, std::uint64_t offset, std::uint64_t len,
                                const CodecRegistry& codecs) {
  if (len == 0) return Bytes{};
  if (fs.block_size == 0) return corrupt("zero block size");
  if (offset > fs.logical_size || len > fs.logical_size - offset) {
    return Error(ErrorCode::kRange, "requested range outside file");
  }
  const std::uint64_t first = offset / fs.block_size;
  const std::uint64_t last = (offset + len - 1) / fs.block_size;
  if (fs.frames.size() != last - first + 1) return corrupt("frames do not cover range");
  const Codec* codec = codecs.find(fs.codec);
  if (codec == nullptr) return Error(ErrorCode::kCodecUnavailable, std::to_string(fs.codec));

  Bytes out;
  out.reserve(len);
  for (std::size_t i = 0; i < fs.frames.size(); ++i) {
    const auto& fr = fs.frames[i];
    const std::uint64_t block_no = first + i;
    if (fr.block_no != block_no || fr.logical_offset != block_no * fs.block_size ||
        fr.logical_len != expected_block_len(fs.logical_size, fs.block_size, block_no)) {
      return corrupt("frame metadata inconsistent");
    }
    if (crc32(fr.payload) != fr.crc32) return corrupt("frame checksum mismatch");
    auto block = codec->decompress(fr.payload, fr.logical_len);
    if (!block.ok()) return corrupt("frame failed to decompress");
    const std::uint64_t lo = std::max(offset, fr.logical_offset);
    const std::uint64_t hi = std::min(offset + len, fr.logical_offset + fr.logical_len);
    out.insert(out.end(), block->begin() + (lo - fr.logical_offset),
               block->begin() + (hi - fr.logical_offset));
  }
  return out;
}

Bytes encode_frame_set(const FrameSet& fs) {
  Bytes out;
  out.reserve(32 + fs.payload_bytes() + fs.frames.size() * 24);
  ByteWriter w(&out);
  w.u64(fs.file_id);
  w.u8(fs.codec);
  w.u32(fs.block_size);
  w.u64(fs.logical_size);
  w.u32(static_cast<std::uint32_t>(fs.frames.size()));
  for (const auto& f : fs.frames) {
    w.u32(f.block_no);
    w.u64(f.logical_offset);
    w.u32(f.logical_len);
    w.u32(f.crc32);
    w.u32(static_cast<std::uint32_t>(f.payload.size()));
    w.raw(f.payload);
  }
  return out;
}

Result<FrameSet> decode_frame_set(ByteSpan bytes) {
  ByteReader r(bytes);
  FrameSet fs;
  std::uint32_t count;
  if (!r.u64(&fs.file_id) || !r.u8(&fs.codec) || !r.u32(&fs.block_size) ||
      !r.u64(&fs.logical_size) || !r.u32(&count)) {
    return Error(ErrorCode::kMalformed, "truncated frame set header");
  }
  // Each frame needs at least 24 bytes; reject counts the input cannot hold.
  if (count > r.remaining() / 24) return Error(ErrorCode::kMalformed, "frame count too large");
  fs.frames.resize(count);
  for (auto& f : fs.frames) {
    std::uint32_t n;
    ByteSpan payload;
    if (!r.u32(&f.block_no) || !r.u64(&f.logical_offset) || !r.u32(&f.logical_len) ||
        !r.u32(&f.crc32) || !r.u32(&n) || !r.raw(n, &payload)) {
      return Error(ErrorCode::kMalformed, "truncated frame");
    }
    f.payload.assign(payload.begin(), payload.end());
  }
  if (!r.at_end()) return Error(ErrorCode::kMalformed, "trailing bytes after frames");
  return fs;
}

}  // namespace petastore::storage
