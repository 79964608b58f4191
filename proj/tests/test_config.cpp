#include <doctest.h>

#include <nlohmann/json.hpp>

#include "covol/config.hpp"
#include "covol/error.hpp"

using namespace covol;
using nlohmann::json;

namespace {

std::string rejection(const SessionConfig& c) {
  try {
    validate_config(c);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config_invalid);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults are valid") {
  const SessionConfig c;
  CHECK(rejection(c).empty());
  CHECK(c.pictogram_interval_ms == 3000);
  CHECK(c.min_feedback_delay_ms == 1500);
  CHECK(c.prompts_per_session == 10);
  CHECK(c.max_attempts == 3);
  CHECK(c.attempt_timeout_ms == 10000);
}

TEST_CASE("pacing floor is 55 pictograms per minute") {
  // 60000 / 55 = 1090.9..., so 1091 ms is the shortest legal gap.
  CHECK(kMinPictogramIntervalMs * 55 >= 60000);
  CHECK((kMinPictogramIntervalMs - 1) * 55 < 60000);

  SessionConfig c;
  c.pictogram_interval_ms = 1091;
  CHECK(rejection(c).empty());
  c.pictogram_interval_ms = 1090;
  CHECK(rejection(c) == "55/minute ceiling");
  c.pictogram_interval_ms = 0;
  CHECK(rejection(c) == "55/minute ceiling");
}

TEST_CASE("invalid knobs") {
  auto broken = [](auto mutate) {
    SessionConfig c;
    mutate(c);
    return !rejection(c).empty();
  };
  CHECK(broken([](SessionConfig& c) { c.player_count = 3; }));
  CHECK(broken([](SessionConfig& c) { c.player_count = 0; }));
  CHECK(broken([](SessionConfig& c) { c.prompts_per_session = 0; }));
  CHECK(broken([](SessionConfig& c) { c.min_feedback_delay_ms = -1; }));
  CHECK(broken([](SessionConfig& c) { c.reward_every_n_correct = 0; }));
  CHECK(broken([](SessionConfig& c) { c.reward_icon.clear(); }));
  CHECK(broken([](SessionConfig& c) { c.reward_duration_ms = 0; }));
  CHECK(broken([](SessionConfig& c) { c.attempt_timeout_ms = 0; }));
  CHECK(broken([](SessionConfig& c) { c.max_attempts = 0; }));
  CHECK(broken([](SessionConfig& c) { c.language.clear(); }));
  CHECK(broken([](SessionConfig& c) { c.mode_weights = {{PromptMode::label, 0.0}}; }));
  CHECK(broken([](SessionConfig& c) { c.mode_weights[PromptMode::sound] = -1.0; }));
  CHECK_FALSE(broken([](SessionConfig& c) { c.min_feedback_delay_ms = 0; }));
}

TEST_CASE("overrides") {
  const SessionConfig base;
  const SessionConfig two = apply_overrides(base, json{{"player_count", 2}, {"reward_every_n_correct", 3}});
  CHECK(two.player_count == 2);
  CHECK(two.reward_every_n_correct == 3);
  CHECK(two.prompts_per_session == base.prompts_per_session);

  const SessionConfig weighted = apply_overrides(base, json{{"mode_weights", {{"attribute", 2.5}}}});
  CHECK(weighted.mode_weights.at(PromptMode::attribute) == 2.5);
  CHECK(weighted.mode_weights.at(PromptMode::label) == 1.0);

  CHECK(apply_overrides(base, json()) == base);
  CHECK(apply_overrides(base, json::object()) == base);
  CHECK_THROWS_AS(apply_overrides(base, json{{"players", 2}}), Error);
  CHECK_THROWS_AS(apply_overrides(base, json{{"player_count", "two"}}), Error);
  CHECK_THROWS_AS(apply_overrides(base, json{{"pictogram_interval_ms", 500}}), Error);
  CHECK_THROWS_AS(apply_overrides(base, json{{"mode_weights", {{"mime", 1.0}}}}), Error);
  CHECK_THROWS_AS(apply_overrides(base, json::array()), Error);
}

TEST_CASE("to_json feeds back through apply_overrides") {
  SessionConfig c;
  c.player_count = 2;
  c.language = "is";
  c.mode_weights[PromptMode::sound] = 0.5;
  CHECK(apply_overrides(SessionConfig{}, to_json(c)) == c);
}
