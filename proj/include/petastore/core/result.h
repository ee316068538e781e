#pragma once

#include <cassert>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace petastore {

// Error codes shared by every module. The spelling returned by to_string()
// is what goes over the wire (`ERR <code>`) and into traces.
enum class ErrorCode {
  kMalformed,
  kUnsortedBindings,
  kInvalidArgument,
  kIoError,
  // catalog
  kDuplicateFederation,
  kUnknownFederation,
  kDuplicatePath,
  kNotFound,
  kFederationOffline,
  kDanglingPointer,
  // event store
  kWrongKind,
  kOrdinalOutOfRange,
  kLockTimeout,
  // lock service
  kRejectedAtCapacity,
  kRejectedDuplicate,
  kNoSession,
  kNotHeld,
  kAlreadyHeld,
  // redirector
  kNoSlaves,
  kUnknownSlave,
  kUnavailable,
  // storage
  kCodecUnavailable,
  kNotResident,
  kRange,
  kChecksumMismatch,
  kNotInTertiary,
  // conditions
  kNonMonotoneInsertionTime,
  kNoMatch,
  kUnknownConfig,
  kUnboundPrefix,
  kDuplicateConfig,
  // harness
  kInvalidScenario,
  kUnknownTarget,
};

std::string_view to_string(ErrorCode code);
bool parse_error_code(std::string_view text, ErrorCode* out);

class Error {
 public:
  explicit Error(ErrorCode code, std::string message = {})
      : code_(code), message_(std::move(message)) {}

  ErrorCode code() const { return code_; }
  const std::string& message() const { return message_; }
  std::string to_string() const;

  bool operator==(const Error& other) const { return code_ == other.code_; }

 private:
  ErrorCode code_;
  std::string message_;
};

// Value-or-error. Accessing value() on an error (or error() on a value) is a
// programming bug and asserts.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : state_(std::move(value)) {}  // NOLINT(runtime/explicit)
  Result(Error error) : state_(std::move(error)) {}  // NOLINT(runtime/explicit)

  bool ok() const { return state_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() & {
    assert(ok());
    return std::get<0>(state_);
  }
  const T& value() const& {
    assert(ok());
    return std::get<0>(state_);
  }
  T&& value() && {
    assert(ok());
    return std::get<0>(std::move(state_));
  }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }

  const Error& error() const {
    assert(!ok());
    return std::get<1>(state_);
  }
  ErrorCode code() const { return error().code(); }

 private:
  std::variant<T, Error> state_;
};

class [[nodiscard]] Status {
 public:
  Status() = default;
  Status(Error error) : error_(std::move(error)), failed_(true) {}  // NOLINT(runtime/explicit)

  static Status OK() { return Status(); }

  bool ok() const { return !failed_; }
  explicit operator bool() const { return ok(); }
  const Error& error() const {
    assert(failed_);
    return error_;
  }
  ErrorCode code() const { return error().code(); }

 private:
  Error error_{ErrorCode::kInvalidArgument};
  bool failed_ = false;
};

}  // namespace petastore

#define PETASTORE_RETURN_IF_ERROR(expr)      \
  do {                                       \
    auto _st = (expr);                       \
    if (!_st.ok()) return _st.error();       \
  } while (0)
