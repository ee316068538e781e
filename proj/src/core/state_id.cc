#include "petastore/core/state_id.h"

#include <openssl/evp.h>

#include "petastore/core/bytes.h"

namespace petastore {

StateId::Digest sha256(std::span<const std::uint8_t> data) {
  StateId::Digest d{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), d.data(), &len, EVP_sha256(), nullptr);
  return d;
}

std::string StateId::to_hex() const { return petastore::to_hex(digest_); }

Result<StateId> StateId::from_hex(std::string_view hex) {
  Bytes raw;
  if (hex.size() != 64 || !petastore::from_hex(hex, &raw)) {
    return Error(ErrorCode::kMalformed, "state id must be 64 hex digits");
  }
  Digest d;
  std::copy(raw.begin(), raw.end(), d.begin());
  return StateId(d);
}

Result<StateId> compute_state_id(std::string_view configuration_name, SimTime insertion_cutoff,
                                 const std::vector<RevisionBinding>& bindings) {
  for (std::size_t i = 1; i < bindings.size(); ++i) {
    if (!(bindings[i - 1].namespace_prefix < bindings[i].namespace_prefix)) {
      return Error(ErrorCode::kUnsortedBindings, bindings[i].namespace_prefix);
    }
  }
  // Canonical form: every variable-length field is length-prefixed so no two
  // distinct inputs serialize to the same bytes.
  Bytes canon;
  ByteWriter w(&canon);
  w.str("petastore.state.v1");
  w.str(configuration_name);
  w.i64(to_us(insertion_cutoff));
  w.u32(static_cast<std::uint32_t>(bindings.size()));
  for (const auto& b : bindings) {
    w.str(b.namespace_prefix);
    w.str(b.revision);
  }
  return StateId(sha256(canon));
}

}  // namespace petastore
