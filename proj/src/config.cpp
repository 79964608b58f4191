#include "covol/config.hpp"

#include <nlohmann/json.hpp>

#include "covol/error.hpp"

namespace covol {
namespace {

[[noreturn]] void invalid(const std::string& rule) {
  throw Error(ErrorCode::config_invalid, rule);
}

template <typename T>
T read_field(const nlohmann::json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    invalid(key + ": wrong type");
  }
}

}  // namespace

const char* to_string(PromptMode mode) noexcept {
  switch (mode) {
    case PromptMode::label: return "label";
    case PromptMode::attribute: return "attribute";
    case PromptMode::sound: return "sound";
  }
  return "label";
}

PromptMode prompt_mode_from_string(const std::string& name) {
  if (name == "label") return PromptMode::label;
  if (name == "attribute") return PromptMode::attribute;
  if (name == "sound") return PromptMode::sound;
  invalid("unknown prompt mode '" + name + "'");
}

void validate_config(const SessionConfig& c) {
  if (c.player_count != 1 && c.player_count != 2)
    invalid("player_count must be 1 or 2");
  if (c.prompts_per_session < 1) invalid("prompts_per_session must be positive");
  if (c.min_feedback_delay_ms < 0)
    invalid("min_feedback_delay_ms must be non-negative");
  if (c.reward_every_n_correct < 1)
    invalid("reward_every_n_correct must be positive");
  if (c.reward_icon.empty()) invalid("reward_icon must be set");
  if (c.reward_duration_ms < 1) invalid("reward_duration_ms must be positive");
  if (c.attempt_timeout_ms < 1) invalid("attempt_timeout_ms must be positive");
  if (c.max_attempts < 1) invalid("max_attempts must be positive");
  if (c.pictogram_interval_ms < kMinPictogramIntervalMs)
    invalid("55/minute ceiling");
  if (c.language.empty()) invalid("language must be set");
  double total = 0.0;
  for (const auto& [mode, weight] : c.mode_weights) {
    if (!(weight >= 0.0)) invalid("mode weights must be non-negative");
    total += weight;
  }
  if (!(total > 0.0)) invalid("at least one prompt mode needs a positive weight");
}

SessionConfig apply_overrides(SessionConfig c, const nlohmann::json& overrides) {
  if (overrides.is_null()) {
    validate_config(c);
    return c;
  }
  if (!overrides.is_object()) invalid("config overrides must be an object");
  for (const auto& [key, value] : overrides.items()) {
    if (key == "player_count") c.player_count = read_field<int>(value, key);
    else if (key == "prompts_per_session") c.prompts_per_session = read_field<int>(value, key);
    else if (key == "min_feedback_delay_ms") c.min_feedback_delay_ms = read_field<std::int64_t>(value, key);
    else if (key == "reward_every_n_correct") c.reward_every_n_correct = read_field<int>(value, key);
    else if (key == "reward_icon") c.reward_icon = read_field<std::string>(value, key);
    else if (key == "reward_duration_ms") c.reward_duration_ms = read_field<std::int64_t>(value, key);
    else if (key == "attempt_timeout_ms") c.attempt_timeout_ms = read_field<std::int64_t>(value, key);
    else if (key == "max_attempts") c.max_attempts = read_field<int>(value, key);
    else if (key == "pictogram_interval_ms") c.pictogram_interval_ms = read_field<std::int64_t>(value, key);
    else if (key == "language") c.language = read_field<std::string>(value, key);
    else if (key == "mode_weights") {
      if (!value.is_object()) invalid("mode_weights must be an object");
      for (const auto& [mode, weight] : value.items())
        c.mode_weights[prompt_mode_from_string(mode)] = read_field<double>(weight, "mode_weights." + mode);
    } else {
      invalid("unknown config key '" + key + "'");
    }
  }
  validate_config(c);
  return c;
}

nlohmann::json to_json(const SessionConfig& c) {
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [mode, weight] : c.mode_weights) weights[to_string(mode)] = weight;
  return {
      {"player_count", c.player_count},
      {"prompts_per_session", c.prompts_per_session},
      {"min_feedback_delay_ms", c.min_feedback_delay_ms},
      {"reward_every_n_correct", c.reward_every_n_correct},
      {"reward_icon", c.reward_icon},
      {"reward_duration_ms", c.reward_duration_ms},
      {"attempt_timeout_ms", c.attempt_timeout_ms},
      {"max_attempts", c.max_attempts},
      {"pictogram_interval_ms", c.pictogram_interval_ms},
      {"language", c.language},
      {"mode_weights", weights},
  };
}

}  // namespace covol
