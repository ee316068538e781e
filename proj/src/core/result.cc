#include "petastore/core/result.h"

#include <array>
#include <utility>

namespace petastore {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 33> kNames = {{
    {ErrorCode::kMalformed, "MALFORMED"},
    {ErrorCode::kUnsortedBindings, "UNSORTED_BINDINGS"},
    {ErrorCode::kInvalidArgument, "INVALID_ARGUMENT"},
    {ErrorCode::kIoError, "IO_ERROR"},
    {ErrorCode::kDuplicateFederation, "DUPLICATE_FEDERATION"},
    {ErrorCode::kUnknownFederation, "UNKNOWN_FEDERATION"},
    {ErrorCode::kDuplicatePath, "DUPLICATE_PATH"},
    {ErrorCode::kNotFound, "NOT_FOUND"},
    {ErrorCode::kFederationOffline, "FEDERATION_OFFLINE"},
    {ErrorCode::kDanglingPointer, "DANGLING_POINTER"},
    {ErrorCode::kWrongKind, "WRONG_KIND"},
    {ErrorCode::kOrdinalOutOfRange, "ORDINAL_OUT_OF_RANGE"},
    {ErrorCode::kLockTimeout, "LOCK_TIMEOUT"},
    {ErrorCode::kRejectedAtCapacity, "REJECTED_AT_CAPACITY"},
    {ErrorCode::kRejectedDuplicate, "REJECTED_DUPLICATE"},
    {ErrorCode::kNoSession, "NO_SESSION"},
    {ErrorCode::kNotHeld, "NOT_HELD"},
    {ErrorCode::kAlreadyHeld, "ALREADY_HELD"},
    {ErrorCode::kNoSlaves, "NO_SLAVES"},
    {ErrorCode::kUnknownSlave, "UNKNOWN_SLAVE"},
    {ErrorCode::kUnavailable, "UNAVAILABLE"},
    {ErrorCode::kCodecUnavailable, "CODEC_UNAVAILABLE"},
    {ErrorCode::kNotResident, "NOT_RESIDENT"},
    {ErrorCode::kRange, "RANGE"},
    {ErrorCode::kChecksumMismatch, "CHECKSUM_MISMATCH"},
    {ErrorCode::kNotInTertiary, "NOT_IN_TERTIARY"},
    {ErrorCode::kNonMonotoneInsertionTime, "NON_MONOTONE_INSERTION_TIME"},
    {ErrorCode::kNoMatch, "NO_MATCH"},
    {ErrorCode::kUnknownConfig, "UNKNOWN_CONFIG"},
    {ErrorCode::kUnboundPrefix, "UNBOUND_PREFIX"},
    {ErrorCode::kDuplicateConfig, "DUPLICATE_CONFIG"},
    {ErrorCode::kInvalidScenario, "INVALID_SCENARIO"},
    {ErrorCode::kUnknownTarget, "UNKNOWN_TARGET"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "UNKNOWN";
}

bool parse_error_code(std::string_view text, ErrorCode* out) {
  for (const auto& [c, name] : kNames) {
    if (name == text) {
      *out = c;
      return true;
    }
  }
  return false;
}

std::string Error::to_string() const {
  std::string s(petastore::to_string(code_));
  if (!message_.empty()) {
    s += ": ";
    s += message_;
  }
  return s;
}

}  // namespace petastore
