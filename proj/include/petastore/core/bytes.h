#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace petastore {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

// Appends fixed-width big-endian integers to a byte buffer.
class ByteWriter {
 public:
  explicit ByteWriter(Bytes* out) : out_(out) {}

  void u8(std::uint8_t v) { out_->push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void raw(ByteSpan bytes) { out_->insert(out_->end(), bytes.begin(), bytes.end()); }
  // u32 length prefix followed by the bytes.
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_->insert(out_->end(), s.begin(), s.end());
  }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out_->push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes* out_;
};

// Bounds-checked big-endian reader. Every getter returns false once the
// input is exhausted; the reader then stays failed.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan in) : in_(in) {}

  bool u8(std::uint8_t* v) {
    std::uint64_t x;
    if (!get(&x, 1)) return false;
    *v = static_cast<std::uint8_t>(x);
    return true;
  }
  bool u16(std::uint16_t* v) {
    std::uint64_t x;
    if (!get(&x, 2)) return false;
    *v = static_cast<std::uint16_t>(x);
    return true;
  }
  bool u32(std::uint32_t* v) {
    std::uint64_t x;
    if (!get(&x, 4)) return false;
    *v = static_cast<std::uint32_t>(x);
    return true;
  }
  bool u64(std::uint64_t* v) { return get(v, 8); }
  bool i64(std::int64_t* v) {
    std::uint64_t x;
    if (!get(&x, 8)) return false;
    *v = static_cast<std::int64_t>(x);
    return true;
  }
  bool raw(std::size_t n, ByteSpan* out) {
    if (failed_ || remaining() < n) return fail();
    *out = in_.subspan(pos_, n);
    pos_ += n;
    return true;
  }
  bool str(std::string* s) {
    std::uint32_t n;
    ByteSpan body;
    if (!u32(&n) || !raw(n, &body)) return false;
    s->assign(body.begin(), body.end());
    return true;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  bool get(std::uint64_t* v, int width) {
    if (failed_ || remaining() < static_cast<std::size_t>(width)) return fail();
    std::uint64_t x = 0;
    for (int i = 0; i < width; ++i) x = (x << 8) | in_[pos_ + i];
    pos_ += width;
    *v = x;
    return true;
  }
  bool fail() {
    failed_ = true;
    return false;
  }

  ByteSpan in_;
  std::size_t pos_ = 0;
  bool failed_ = false;
};

std::string to_hex(ByteSpan bytes);
bool from_hex(std::string_view hex, Bytes* out);

}  // namespace petastore
