#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mat {

/// Stable machine-parsable failure categories. The CLI prints exactly one
/// line `<slug>: <message>` and exits nonzero; tests match on the slug.
enum class ErrorCategory {
  config,             // bad run-config contents (unknown key, bad value)
  usage,              // bad command invocation
  io,                 // filesystem failures
  bad_magic,          // file is not the expected container
  bad_version,        // container version unsupported
  truncated,          // container payload shorter than declared
  mismatch,           // spec hash / param count / shape disagreement
  numeric,            // non-finite values where finite ones are required
  degenerate_segment, // expert segment with near-zero weight change
  provenance,         // recorded digest does not match re-derived digest
};

inline std::string_view category_slug(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config-error";
    case ErrorCategory::usage: return "usage-error";
    case ErrorCategory::io: return "io-error";
    case ErrorCategory::bad_magic: return "bad-magic";
    case ErrorCategory::bad_version: return "bad-version";
    case ErrorCategory::truncated: return "truncated";
    case ErrorCategory::mismatch: return "mismatch";
    case ErrorCategory::numeric: return "numeric-error";
    case ErrorCategory::degenerate_segment: return "degenerate-segment";
    case ErrorCategory::provenance: return "provenance-error";
  }
  return "unknown-error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }
  std::string_view slug() const { return category_slug(category_); }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& message) {
  throw Error(c, message);
}

}  // namespace mat
