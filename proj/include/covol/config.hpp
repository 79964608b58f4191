#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace covol {

enum class PromptMode { label, attribute, sound };

const char* to_string(PromptMode mode) noexcept;
PromptMode prompt_mode_from_string(const std::string& name);

/// Shortest allowed gap between two prompts: 60000 / 55, rounded up.
inline constexpr std::int64_t kMinPictogramIntervalMs = 1091;

/// Operator-tunable knobs of one game. Defaults follow the usual tacting
/// pace of a pictogram every three seconds.
struct SessionConfig {
  int player_count = 1;
  int prompts_per_session = 10;
  std::int64_t min_feedback_delay_ms = 1500;
  int reward_every_n_correct = 1;
  std::string reward_icon = "star";
  std::int64_t reward_duration_ms = 2000;
  std::int64_t attempt_timeout_ms = 10000;
  int max_attempts = 3;
  std::int64_t pictogram_interval_ms = 3000;
  std::string language = "en";
  std::map<PromptMode, double> mode_weights = {{PromptMode::label, 1.0},
                                               {PromptMode::attribute, 0.0},
                                               {PromptMode::sound, 0.0}};

  bool operator==(const SessionConfig&) const = default;
};

/// Throws Error(config_invalid) naming the first rule broken.
void validate_config(const SessionConfig& config);

/// Applies a JSON object of overrides on top of `base`. Unknown keys and
/// wrong types are rejected with Error(config_invalid); the result is
/// validated.
SessionConfig apply_overrides(SessionConfig base,
                              const nlohmann::json& overrides);

nlohmann::json to_json(const SessionConfig& config);

}  // namespace covol
