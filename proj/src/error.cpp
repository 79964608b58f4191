#include "covol/error.hpp"

namespace covol {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::file_not_found: return "file_not_found";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::schema_violation: return "schema_violation";
    case ErrorCode::empty_catalog: return "empty_catalog";
    case ErrorCode::no_compatible_objects: return "no_compatible_objects";
    case ErrorCode::config_invalid: return "config_invalid";
    case ErrorCode::task_count_mismatch: return "task_count_mismatch";
    case ErrorCode::invalid_transition: return "bad_phase";
    case ErrorCode::session_not_complete: return "session_not_complete";
    case ErrorCode::no_active_prompt: return "no_active_prompt";
    case ErrorCode::unsupported_language: return "unsupported_language";
    case ErrorCode::handle_finalized: return "handle_finalized";
    case ErrorCode::recognizer_unavailable: return "recognizer_unavailable";
    case ErrorCode::audio_unreadable: return "audio_unreadable";
    case ErrorCode::malformed_frame: return "malformed_frame";
    case ErrorCode::catalog_unavailable: return "catalog_unavailable";
    case ErrorCode::empty_reference: return "empty_reference";
    case ErrorCode::empty_manifest: return "empty_manifest";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

}  // namespace covol
