#include <doctest.h>

#include <map>

#include "covol/session.hpp"
#include "covol/wire.hpp"
#include "support.hpp"
#include "wire_gen.hpp"

using namespace covol;
using namespace covol::wire;
using nlohmann::json;

namespace {

std::string malformed_reason(const Frame& frame) {
  try {
    decode(frame);
  } catch (const MalformedFrame& e) {
    CHECK(e.code() == ErrorCode::malformed_frame);
    return e.what();
  }
  return "accepted";
}

Frame text(const json& doc) { return {false, doc.dump()}; }

}  // namespace

TEST_CASE("property: every tag survives encode then decode") {
  covol::testing::WireGen gen(99);
  std::map<std::string, int> seen;
  for (std::size_t tag = 0; tag < covol::testing::kWireTagCount; ++tag) {
    for (int i = 0; i < 150; ++i) {
      const Message m = gen.message(tag);
      const Frame frame = encode(m);
      CHECK(frame.binary == std::holds_alternative<AudioChunkMsg>(m.body));
      const Message back = decode(frame);
      CHECK(back == m);
      CHECK(encode(back) == frame);
      ++seen[std::holds_alternative<Unknown>(m.body) ? "unknown" : std::string(type_of(m.body))];
    }
  }
  CHECK(seen.size() == covol::testing::kWireTagCount);
}

TEST_CASE("envelope layout") {
  const Frame f = encode(Message{TryAgain{2}});
  const json doc = json::parse(f.data);
  CHECK(doc == json{{"type", "try_again"}, {"protocol_version", 1}, {"payload", {{"attempts_left", 2}}}});

  const Frame audio = encode(Message{AudioChunkMsg{0x01020304u, {0xAA, 0xBB}}});
  CHECK(audio.binary);
  CHECK(audio.data == std::string("\x01\x02\x03\x04\xAA\xBB", 6));

  const Message join = decode(encode(Message{JoinSession{"AB12", "Ana", "cat", std::nullopt}}));
  CHECK(json::parse(encode(join).data)["payload"]["player_index"].is_null());
}

TEST_CASE("malformed frames") {
  CHECK(malformed_reason({false, "{}"}) == "malformed frame: missing type");
  CHECK(malformed_reason({false, "not json"}) == "malformed frame: not valid JSON");
  CHECK(malformed_reason({false, "[1,2]"}) == "malformed frame: message must be a JSON object");
  CHECK(malformed_reason(text({{"type", 7}, {"protocol_version", 1}})) == "malformed frame: missing type");
  CHECK(malformed_reason(text({{"type", "ready"}})) == "malformed frame: missing protocol_version");
  CHECK(malformed_reason(text({{"type", "ready"}, {"protocol_version", "1"}})) ==
        "malformed frame: missing protocol_version");
  CHECK(malformed_reason(text({{"type", "ready"}, {"protocol_version", 1}, {"payload", 3}})) ==
        "malformed frame: payload must be an object");
  CHECK(malformed_reason(text({{"type", "audio_chunk"}, {"protocol_version", 1}, {"payload", json::object()}})) ==
        "malformed frame: audio_chunk must be sent as a binary frame");
  CHECK(malformed_reason(text({{"type", "transcript"}, {"protocol_version", 1}, {"payload", json::object()}})) ==
        "malformed frame: missing field 'text'");
  CHECK(malformed_reason(text({{"type", "try_again"}, {"protocol_version", 1}, {"payload", {{"attempts_left", "x"}}}})) ==
        "malformed frame: field 'attempts_left' has the wrong type");
  CHECK(malformed_reason({true, "abc"}) == "malformed frame: binary frame shorter than its sequence header");
  CHECK(malformed_reason({true, std::string(4, '\0')}) == "accepted");
}

TEST_CASE("unknown tags decode instead of failing") {
  const Message m = decode(text({{"type", "future_thing"}, {"protocol_version", 1}, {"payload", {{"x", 1}}}}));
  const auto* unknown = std::get_if<Unknown>(&m.body);
  REQUIRE(unknown != nullptr);
  CHECK(unknown->type == "future_thing");
  CHECK(unknown->payload == json{{"x", 1}});

  // Missing or null payloads are empty payloads.
  CHECK(decode(text({{"type", "ready"}, {"protocol_version", 1}})) == Message{Ready{}});
  CHECK(decode(text({{"type", "leave"}, {"protocol_version", 1}, {"payload", nullptr}})) == Message{Leave{}});
  // Extra fields are tolerated.
  CHECK(decode(text({{"type", "transcript"}, {"protocol_version", 1}, {"payload", {{"text", "a"}, {"new", 1}}}})) ==
        Message{Transcript{"a"}});
  // Version is reported, not enforced, by the codec.
  CHECK(decode(text({{"type", "ready"}, {"protocol_version", 9}})).protocol_version == 9);
}

TEST_CASE("effects map onto server messages") {
  SessionConfig config;
  config.player_count = 2;
  SessionState state = create_session(config, covol::testing::fruit_tasks(10), "s1");
  state.players = {{0, "Ana", "cat", true}, {1, "Ben", "dog", true}};

  PromptTask task = covol::testing::fruit_tasks(1)[0];
  const auto shown = effect_to_message(effect::ShowPrompt{3, task, 1}, state);
  REQUIRE(shown.has_value());
  const auto& p = std::get<PromptShown>(shown->body);
  CHECK(p.task_index == 3);
  CHECK(p.object_id == task.object_id);
  CHECK(p.image_ref == task.image_ref);
  CHECK(p.mode == "label");
  CHECK(p.active_player == 1);

  CHECK(effect_to_message(effect::AdvanceTurn{1}, state) == Message{TurnChanged{1, "Ben"}});
  CHECK(effect_to_message(effect::ShowReward{"star", 2000}, state) == Message{Reward{"star", 2000}});
  CHECK(effect_to_message(effect::ShowTryAgain{2}, state) == Message{TryAgain{2}});
  CHECK(effect_to_message(effect::ShowPassed{}, state) == Message{PromptPassed{}});
  MatchResult hit;
  hit.matched = true;
  hit.matched_label = "apple";
  CHECK(effect_to_message(effect::ReportRecognition{0, "an apple", hit, 120}, state) ==
        Message{RecognitionResult{true, std::string("apple"), "an apple", 120}});
  CHECK_FALSE(effect_to_message(effect::StartTimer{{TimerKind::attempt, 1}, 10000}, state).has_value());
  CHECK_FALSE(effect_to_message(effect::RecordOutcome{}, state).has_value());
  CHECK(effect_to_message(effect::EndSession{Summary{}}, state) == Message{SessionComplete{Summary{}}});
}
