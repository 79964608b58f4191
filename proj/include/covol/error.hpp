#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace covol {

/// Machine-readable failure category. The wire protocol reports these as the
/// `code` of an error message, so keep the spellings stable.
enum class ErrorCode {
  file_not_found,
  parse_error,
  schema_violation,
  empty_catalog,
  no_compatible_objects,
  config_invalid,
  task_count_mismatch,
  invalid_transition,
  session_not_complete,
  no_active_prompt,
  unsupported_language,
  handle_finalized,
  recognizer_unavailable,
  audio_unreadable,
  malformed_frame,
  catalog_unavailable,
  empty_reference,
  empty_manifest,
  io_error,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string reason)
      : Error(ErrorCode::parse_error,
              "line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(std::move(reason)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

}  // namespace covol
