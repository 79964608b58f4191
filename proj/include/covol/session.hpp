#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "covol/asr.hpp"
#include "covol/catalog.hpp"
#include "covol/config.hpp"
#include "covol/error.hpp"
#include "covol/tact_matcher.hpp"

namespace covol {

enum class Phase {
  lobby,
  prompting,         // waiting out the pacing gap before the next prompt
  awaiting_answer,
  pre_reward_delay,  // answer accepted, feedback held back
  reward,
  passed_notice,     // prompt passed, waiting out the pacing gap
  complete,
};

const char* to_string(Phase phase) noexcept;

struct PlayerSlot {
  int index = 0;
  std::string display_name;
  std::string avatar_id;
  bool connected = false;

  bool operator==(const PlayerSlot&) const = default;
};

std::string default_player_name(int index);

enum class TimerKind { attempt, feedback_delay, reward, pacing };

const char* to_string(TimerKind kind) noexcept;

/// At most one timer is armed at a time. The serial makes every arming
/// distinct so late deliveries of an old timer are recognizable.
struct TimerId {
  TimerKind kind = TimerKind::attempt;
  std::uint64_t serial = 0;

  bool operator==(const TimerId&) const = default;
};

enum class OutcomeResult { correct, passed };

const char* to_string(OutcomeResult result) noexcept;

struct PromptOutcome {
  std::size_t task_index = 0;
  int player_index = 0;
  OutcomeResult result = OutcomeResult::passed;
  int attempts_used = 0;
  std::string final_transcript;
  std::optional<std::string> matched_label;  // set iff result == correct
  std::int64_t recognition_latency_ms = 0;

  bool operator==(const PromptOutcome&) const = default;
};

struct PlayerSummary {
  int player_index = 0;
  std::string display_name;
  int tasks = 0;
  int correct = 0;
  int passed = 0;

  bool operator==(const PlayerSummary&) const = default;
};

struct Summary {
  std::vector<PlayerSummary> players;
  int total_tasks = 0;
  int total_correct = 0;
  int total_passed = 0;
  int rewards_shown = 0;
  double mean_recognition_latency_ms = 0.0;
  std::int64_t total_duration_ms = 0;

  bool operator==(const Summary&) const = default;
};

/// Authoritative record of one game. Only handle_event produces successors.
struct SessionState {
  std::string session_id;
  SessionConfig config;
  std::vector<PlayerSlot> players;
  std::vector<PromptTask> tasks;
  std::size_t cursor = 0;
  int active_player = 0;
  int attempts_on_current = 0;
  std::vector<int> correct_counts;
  Phase phase = Phase::lobby;
  std::vector<PromptOutcome> metrics;

  std::optional<TimerId> armed_timer;
  std::uint64_t timer_serial = 0;
  std::optional<std::int64_t> last_prompt_at_ms;
  std::int64_t started_at_ms = 0;
  std::int64_t completed_at_ms = 0;
  int total_correct = 0;
  int rewards_shown = 0;
  std::string last_transcript;  // most recent transcript for the current task
  std::int64_t last_latency_ms = 0;
  std::int64_t recognition_count = 0;
  std::int64_t recognition_latency_total_ms = 0;

  const PromptTask& current_task() const { return tasks.at(cursor); }

  bool operator==(const SessionState&) const = default;
};

namespace event {
struct PlayerJoined {
  PlayerSlot slot;
  bool operator==(const PlayerJoined&) const = default;
};
struct PlayerLeft {
  int player_index = 0;
  bool operator==(const PlayerLeft&) const = default;
};
struct AllReady {
  bool operator==(const AllReady&) const = default;
};
struct TranscriptFinal {
  FinalTranscript transcript;
  bool operator==(const TranscriptFinal&) const = default;
};
struct AttemptTimeout {
  bool operator==(const AttemptTimeout&) const = default;
};
struct TimerElapsed {
  TimerId timer;
  bool operator==(const TimerElapsed&) const = default;
};
}  // namespace event

using SessionEvent = std::variant<event::PlayerJoined, event::PlayerLeft, event::AllReady,
                                  event::TranscriptFinal, event::AttemptTimeout,
                                  event::TimerElapsed>;

const char* event_name(const SessionEvent& event) noexcept;

namespace effect {
struct ShowPrompt {
  std::size_t task_index = 0;
  PromptTask task;
  int active_player = 0;
  bool operator==(const ShowPrompt&) const = default;
};
struct StartTimer {
  TimerId timer;
  std::int64_t duration_ms = 0;
  bool operator==(const StartTimer&) const = default;
};
// Emitted for every transcript evaluated against the current prompt.
struct ReportRecognition {
  int player_index = 0;
  std::string transcript;
  MatchResult match;
  std::int64_t latency_ms = 0;
  bool operator==(const ReportRecognition&) const = default;
};
struct ShowReward {
  std::string icon;
  std::int64_t duration_ms = 0;
  bool operator==(const ShowReward&) const = default;
};
struct ShowTryAgain {
  int attempts_left = 0;
  bool operator==(const ShowTryAgain&) const = default;
};
struct ShowPassed {
  bool operator==(const ShowPassed&) const = default;
};
struct AdvanceTurn {
  int new_active = 0;
  bool operator==(const AdvanceTurn&) const = default;
};
struct RecordOutcome {
  PromptOutcome outcome;
  bool operator==(const RecordOutcome&) const = default;
};
struct EndSession {
  Summary summary;
  bool operator==(const EndSession&) const = default;
};
}  // namespace effect

using Effect = std::variant<effect::ShowPrompt, effect::StartTimer, effect::ReportRecognition,
                            effect::ShowReward, effect::ShowTryAgain, effect::ShowPassed,
                            effect::AdvanceTurn, effect::RecordOutcome, effect::EndSession>;

struct Transition {
  SessionState state;
  std::vector<Effect> effects;

  bool operator==(const Transition&) const = default;
};

class InvalidTransition : public Error {
 public:
  InvalidTransition(Phase phase, std::string event, const std::string& detail = {});

  Phase phase() const noexcept { return phase_; }
  const std::string& event() const noexcept { return event_; }

 private:
  Phase phase_;
  std::string event_;
};

/// Throws Error(config_invalid) or Error(task_count_mismatch).
SessionState create_session(const SessionConfig& config, std::vector<PromptTask> tasks,
                            std::string session_id = {});

/// Pure transition function. All time comes from `now_ms`; the input state
/// is never modified. Throws InvalidTransition on protocol misuse, including
/// delivery of a timer that is no longer armed.
Transition handle_event(const SessionState& state, const SessionEvent& event,
                        std::int64_t now_ms);

/// Throws Error(session_not_complete).
Summary session_summary(const SessionState& state);

/// Text-mode bypass: the event a transcript of `text` with zero latency
/// would produce. Throws Error(no_active_prompt) outside awaiting_answer.
SessionEvent transcript_injection(const SessionState& state, const std::string& text,
                                  std::int64_t now_ms);

}  // namespace covol
