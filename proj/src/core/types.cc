#include "petastore/core/types.h"

#include "petastore/core/bytes.h"

namespace petastore {

std::string_view to_string(DataClass c) { return c == DataClass::kReal ? "REAL" : "SIM"; }

bool parse_data_class(std::string_view text, DataClass* out) {
  if (text == "REAL") {
    *out = DataClass::kReal;
    return true;
  }
  if (text == "SIM") {
    *out = DataClass::kSim;
    return true;
  }
  return false;
}

Result<FederationId> FederationId::make(std::string run_label, DataClass data_class) {
  if (run_label.empty()) return Error(ErrorCode::kInvalidArgument, "empty run label");
  if (run_label.find_first_of(":\t\n /") != std::string::npos) {
    return Error(ErrorCode::kInvalidArgument, "run label contains a reserved character");
  }
  return FederationId{std::move(run_label), data_class};
}

Result<FederationId> FederationId::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    return Error(ErrorCode::kInvalidArgument, "expected <run_label>:<REAL|SIM>");
  }
  DataClass dc;
  if (!parse_data_class(text.substr(colon + 1), &dc)) {
    return Error(ErrorCode::kInvalidArgument, "bad data class in " + std::string(text));
  }
  return make(std::string(text.substr(0, colon)), dc);
}

std::string FederationId::to_string() const {
  return run_label + ":" + std::string(petastore::to_string(data_class));
}

std::string_view to_string(ComponentKind k) {
  static constexpr std::array<std::string_view, kComponentKindCount> kNames = {
      "col", "evt", "evshdr", "tag", "aod", "esd", "raw", "rec"};
  return kNames[static_cast<std::size_t>(k)];
}

std::string_view to_string(CollectionKind k) {
  return k == CollectionKind::kStream ? "STREAM" : "SKIM";
}

bool parse_collection_kind(std::string_view text, CollectionKind* out) {
  if (text == "STREAM") {
    *out = CollectionKind::kStream;
    return true;
  }
  if (text == "SKIM") {
    *out = CollectionKind::kSkim;
    return true;
  }
  return false;
}

std::size_t EventHeader::component_count() const {
  std::size_t n = 0;
  for (const auto& c : components) n += c.has_value();
  return n;
}

std::string to_hex(ByteSpan bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

bool from_hex(std::string_view hex, Bytes* out) {
  if (hex.size() % 2 != 0) return false;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  out->clear();
  out->reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]);
    int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) return false;
    out->push_back(static_cast<std::uint8_t>(hi << 4 | lo));
  }
  return true;
}

}  // namespace petastore
