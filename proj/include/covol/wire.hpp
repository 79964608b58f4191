#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "covol/error.hpp"
#include "covol/session.hpp"

namespace covol::wire {

inline constexpr int kProtocolVersion = 1;

// Client -> server ---------------------------------------------------------

struct CreateSession {
  static constexpr std::string_view kType = "create_session";
  nlohmann::json config = nlohmann::json::object();  // SessionConfig overrides
  bool operator==(const CreateSession&) const = default;
};

/// `session_id` accepts either the session id or its join code. Setting
/// `player_index` reclaims that slot after a disconnect.
struct JoinSession {
  static constexpr std::string_view kType = "join_session";
  std::string session_id;
  std::string display_name;
  std::string avatar_id;
  std::optional<int> player_index;
  bool operator==(const JoinSession&) const = default;
};

struct Ready {
  static constexpr std::string_view kType = "ready";
  bool operator==(const Ready&) const = default;
};

/// Always travels as a binary frame: 4-byte big-endian seq, then raw PCM.
struct AudioChunkMsg {
  static constexpr std::string_view kType = "audio_chunk";
  std::uint32_t seq = 0;
  std::vector<std::uint8_t> pcm;
  bool operator==(const AudioChunkMsg&) const = default;
};

struct EndOfSpeech {
  static constexpr std::string_view kType = "end_of_speech";
  bool operator==(const EndOfSpeech&) const = default;
};

struct Transcript {
  static constexpr std::string_view kType = "transcript";
  std::string text;
  bool operator==(const Transcript&) const = default;
};

struct Leave {
  static constexpr std::string_view kType = "leave";
  bool operator==(const Leave&) const = default;
};

// Server -> client ---------------------------------------------------------

struct SessionCreated {
  static constexpr std::string_view kType = "session_created";
  std::string session_id;
  std::string join_code;
  bool operator==(const SessionCreated&) const = default;
};

struct RosterEntry {
  int player_index = 0;
  std::string display_name;
  std::string avatar_id;
  bool connected = false;
  bool operator==(const RosterEntry&) const = default;
};

struct Joined {
  static constexpr std::string_view kType = "joined";
  int player_index = 0;
  std::vector<RosterEntry> roster;
  bool operator==(const Joined&) const = default;
};

struct PromptShown {
  static constexpr std::string_view kType = "prompt_shown";
  std::size_t task_index = 0;
  std::string object_id;
  std::string image_ref;
  std::optional<std::string> sound_ref;
  std::string prompt_text;
  std::string mode;       // label | attribute | sound
  std::string attribute;  // attribute name in attribute mode, else empty
  int active_player = 0;
  bool operator==(const PromptShown&) const = default;
};

struct PartialTranscript {
  static constexpr std::string_view kType = "partial_transcript";
  std::string text;
  bool operator==(const PartialTranscript&) const = default;
};

struct RecognitionResult {
  static constexpr std::string_view kType = "recognition_result";
  bool matched = false;
  std::optional<std::string> matched_label;
  std::string transcript;
  std::int64_t latency_ms = 0;
  bool operator==(const RecognitionResult&) const = default;
};

struct TryAgain {
  static constexpr std::string_view kType = "try_again";
  int attempts_left = 0;
  bool operator==(const TryAgain&) const = default;
};

struct Reward {
  static constexpr std::string_view kType = "reward";
  std::string icon;
  std::int64_t duration_ms = 0;
  bool operator==(const Reward&) const = default;
};

struct PromptPassed {
  static constexpr std::string_view kType = "prompt_passed";
  bool operator==(const PromptPassed&) const = default;
};

struct TurnChanged {
  static constexpr std::string_view kType = "turn_changed";
  int active_player = 0;
  std::string display_name;
  bool operator==(const TurnChanged&) const = default;
};

struct SessionComplete {
  static constexpr std::string_view kType = "session_complete";
  Summary summary;
  bool operator==(const SessionComplete&) const = default;
};

struct ErrorMsg {
  static constexpr std::string_view kType = "error";
  std::string code;
  std::string message;
  bool operator==(const ErrorMsg&) const = default;
};

/// Any tag this build does not know. Kept so newer peers do not break the
/// connection.
struct Unknown {
  std::string type;
  nlohmann::json payload = nlohmann::json::object();
  bool operator==(const Unknown&) const = default;
};

using Body = std::variant<CreateSession, JoinSession, Ready, AudioChunkMsg, EndOfSpeech, Transcript,
                          Leave, SessionCreated, Joined, PromptShown, PartialTranscript,
                          RecognitionResult, TryAgain, Reward, PromptPassed, TurnChanged,
                          SessionComplete, ErrorMsg, Unknown>;

struct Message {
  Body body;
  int protocol_version = kProtocolVersion;

  bool operator==(const Message&) const = default;
};

std::string_view type_of(const Body& body);

/// One WebSocket frame: JSON text, or binary for audio chunks.
struct Frame {
  bool binary = false;
  std::string data;

  bool operator==(const Frame&) const = default;
};

class MalformedFrame : public Error {
 public:
  explicit MalformedFrame(const std::string& reason)
      : Error(ErrorCode::malformed_frame, "malformed frame: " + reason) {}
};

Frame encode(const Message& message);
/// Throws MalformedFrame. Unknown tags decode to `Unknown`; the caller checks
/// protocol_version.
Message decode(const Frame& frame);

nlohmann::json summary_to_json(const Summary& summary);
Summary summary_from_json(const nlohmann::json& json);

/// Maps a state-machine effect to the message broadcast to clients, or
/// nullopt for internal effects (timers, outcome records).
std::optional<Message> effect_to_message(const Effect& effect, const SessionState& state);

}  // namespace covol::wire
