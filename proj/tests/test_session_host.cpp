#include <doctest.h>

#include <algorithm>
#include <set>

#include "covol/session_host.hpp"
#include "host_support.hpp"

using namespace covol;
using namespace covol::server;
using covol::testing::error_codes;
using covol::testing::game_messages;
using covol::testing::messages_of;
using covol::testing::Table;
using nlohmann::json;

namespace {

const json kTwoPlayers = {{"player_count", 2}};

struct Seated {
  std::string code;
  ClientId a = 0;
  ClientId b = 0;
};

Seated seat_two(Table& t, bool start = true) {
  Seated s;
  s.a = t.gateway.connect();
  s.b = t.gateway.connect();
  s.code = t.create(s.a, kTwoPlayers);
  t.send(s.a, wire::JoinSession{s.code, "Ana", "fox", std::nullopt});
  t.send(s.b, wire::JoinSession{s.code, "Ben", "owl", std::nullopt});
  if (start) {
    t.send(s.a, wire::Ready{});
    t.send(s.b, wire::Ready{});
  }
  return s;
}

std::string right_answer(Table& t, const std::string& code) {
  return t.host(code)->snapshot().current_task().expected.front();
}

ClientId active_client(Table& t, const Seated& s) {
  return t.host(s.code)->snapshot().active_player == 0 ? s.a : s.b;
}

// Answers correctly until the session is over.
void play_out(Table& t, const Seated& s) {
  for (int guard = 0; guard < 1000 && !t.host(s.code)->complete(); ++guard) {
    if (t.host(s.code)->snapshot().phase == Phase::awaiting_answer)
      t.send(active_client(t, s), wire::Transcript{right_answer(t, s.code)});
    else
      t.step(s.code);
  }
}

}  // namespace

TEST_CASE("join codes are short, well formed and unique") {
  Table t(7);
  const ClientId c = t.gateway.connect();
  std::set<std::string> codes;
  for (int i = 0; i < 1000; ++i) {
    const std::string code = t.create(c, json::object());
    CHECK(is_valid_join_code(code));
    codes.insert(code);
  }
  CHECK(codes.size() == 1000);
  CHECK(t.gateway.registry().size() == 1000);
  CHECK_FALSE(is_valid_join_code("abcd"));
  CHECK_FALSE(is_valid_join_code("ABCDE"));
  CHECK_FALSE(is_valid_join_code("AB-D"));
}

TEST_CASE("creating a session in a language without a catalog") {
  Table t;
  const ClientId c = t.gateway.connect();
  CHECK(t.create(c, {{"language", "xx"}}).empty());
  CHECK(error_codes(t.inbox(c)) == std::vector<std::string>{"catalog_unavailable"});
  t.create(c, {{"pictogram_interval_ms", 1000}});
  CHECK(error_codes(t.inbox(c)).back() == "config_invalid");
  CHECK(t.gateway.registry().size() == 0);
}

TEST_CASE("joining by code, roster and lobby readiness") {
  Table t;
  Seated s = seat_two(t, false);
  const auto joined = messages_of<wire::Joined>(t.inbox(s.b));
  REQUIRE_FALSE(joined.empty());
  CHECK(joined.back().player_index == 1);
  CHECK(joined.back().roster.size() == 2);
  CHECK(joined.back().roster[0].display_name == "Ana");
  CHECK(joined.back().roster[1].avatar_id == "owl");

  // Lowercase codes work too.
  const ClientId third = t.gateway.connect();
  std::string lower = s.code;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  t.send(third, wire::JoinSession{lower, "Cy", "", std::nullopt});
  CHECK(error_codes(t.inbox(third)) == std::vector<std::string>{"session_full"});
  t.send(third, wire::JoinSession{"ZZZZ", "Cy", "", std::nullopt});
  CHECK(error_codes(t.inbox(third)).back() == "unknown_session");

  // One player ready is not enough.
  t.send(s.a, wire::Ready{});
  CHECK(messages_of<wire::PromptShown>(t.inbox(s.a)).empty());
  CHECK(t.host(s.code)->snapshot().phase == Phase::lobby);
  t.send(s.b, wire::Ready{});
  const auto prompts = messages_of<wire::PromptShown>(t.inbox(s.b));
  REQUIRE(prompts.size() == 1);
  CHECK(prompts[0].active_player == 0);
  CHECK(messages_of<wire::PromptShown>(t.inbox(s.a)) == prompts);
}

TEST_CASE("only the active player may answer") {
  Table t;
  Seated s = seat_two(t);
  t.send(s.b, wire::Transcript{right_answer(t, s.code)});
  CHECK(error_codes(t.inbox(s.b)) == std::vector<std::string>{"not_your_turn"});
  t.send(s.b, wire::EndOfSpeech{});
  CHECK(error_codes(t.inbox(s.b)).back() == "not_your_turn");
  CHECK(t.host(s.code)->snapshot().attempts_on_current == 0);

  t.send(s.a, wire::Transcript{right_answer(t, s.code)});
  const auto results = messages_of<wire::RecognitionResult>(t.inbox(s.b));
  REQUIRE(results.size() == 1);
  CHECK(results[0].matched);
  // Between prompts nobody can answer.
  t.send(s.a, wire::Transcript{"again"});
  CHECK(error_codes(t.inbox(s.a)).back() == "no_active_prompt");
  t.send(s.a, wire::Ready{});
  CHECK(error_codes(t.inbox(s.a)).back() == "bad_phase");
  t.send(s.a, wire::SessionCreated{"x", "y"});
  CHECK(error_codes(t.inbox(s.a)).back() == "bad_request");
}

TEST_CASE("protocol errors at the gateway") {
  Table t;
  const ClientId c = t.gateway.connect();
  t.gateway.on_frame(c, {false, "{}"});
  CHECK(error_codes(t.inbox(c)) == std::vector<std::string>{"malformed"});
  t.gateway.on_frame(c, {false, R"({"type":"audio_chunk","protocol_version":1,"payload":{}})"});
  CHECK(error_codes(t.inbox(c)).back() == "malformed");
  CHECK(t.net.closed.empty());

  // Unknown tags are ignored and the connection stays open.
  t.send(c, wire::Unknown{"future_thing", {{"x", 1}}});
  CHECK(t.inbox(c).size() == 2);
  CHECK(t.net.closed.empty());

  t.send(c, wire::Ready{});
  CHECK(error_codes(t.inbox(c)).back() == "not_joined");

  t.send(c, wire::Ready{}, wire::kProtocolVersion + 1);
  CHECK(error_codes(t.inbox(c)).back() == "version");
  CHECK(t.net.closed.contains(c));
}

TEST_CASE("a game played over the gateway reaches its summary") {
  Table t(3);
  Seated s = seat_two(t);
  play_out(t, s);
  const SessionState final_state = t.host(s.code)->snapshot();
  CHECK(final_state.phase == Phase::complete);
  const auto done = messages_of<wire::SessionComplete>(t.inbox(s.a));
  REQUIRE(done.size() == 1);
  CHECK(done[0].summary == session_summary(final_state));
  CHECK(done[0].summary.total_correct == 10);
  CHECK(game_messages(t.inbox(s.a)) == game_messages(t.inbox(s.b)));

  const auto prompts = messages_of<wire::PromptShown>(t.inbox(s.a));
  REQUIRE(prompts.size() == 10);
  for (const auto& p : prompts) CHECK(p.active_player == static_cast<int>(p.task_index % 2));

  // Leaving a finished game drops it from the registry.
  t.send(s.a, wire::Leave{});
  t.gateway.on_disconnect(s.b);
  CHECK(t.gateway.registry().size() == 0);
}

TEST_CASE("shared screen: one connection holds both slots") {
  Table t;
  const ClientId c = t.gateway.connect();
  const std::string code = t.create(c, kTwoPlayers);
  t.send(c, wire::JoinSession{code, "Ana", "", std::nullopt});
  t.send(c, wire::JoinSession{code, "Ben", "", std::nullopt});
  t.send(c, wire::Ready{});
  REQUIRE(t.host(code)->snapshot().phase == Phase::awaiting_answer);
  for (int guard = 0; guard < 1000 && !t.host(code)->complete(); ++guard) {
    if (t.host(code)->snapshot().phase == Phase::awaiting_answer)
      t.send(c, wire::Transcript{right_answer(t, code)});
    else
      t.step(code);
  }
  CHECK(t.host(code)->complete());
  CHECK(error_codes(t.inbox(c)).empty());
}

TEST_CASE("disconnect pauses; rejoining the slot restores the exact state") {
  Table t;
  Seated s = seat_two(t);
  t.send(s.a, wire::Transcript{"wrong"});
  t.advance(2500);
  auto h = t.host(s.code);
  const SessionState before = h->snapshot();
  const auto due_before = h->next_deadline();
  REQUIRE(due_before.has_value());

  t.gateway.on_disconnect(s.b);
  CHECK(h->paused());
  CHECK(error_codes(t.inbox(s.a)).back() == "paused");
  CHECK_FALSE(h->snapshot().players[1].connected);

  // Time passes while paused; nothing fires.
  t.advance(60000);
  CHECK(h->snapshot().attempts_on_current == before.attempts_on_current);
  t.send(s.a, wire::Transcript{right_answer(t, s.code)});
  CHECK(error_codes(t.inbox(s.a)).back() == "paused");

  const ClientId back = t.gateway.connect();
  t.send(back, wire::JoinSession{s.code, "Someone else", "", 0});
  CHECK(error_codes(t.inbox(back)).back() == "slot_taken");
  t.send(back, wire::JoinSession{s.code, "", "", 1});
  CHECK(h->snapshot() == before);
  CHECK_FALSE(h->paused());
  // The remaining timer budget carried over.
  CHECK(*h->next_deadline() - t.clock.now_ms() == *due_before - (t.clock.now_ms() - 60000));
  // The returning client sees the prompt in play.
  CHECK(messages_of<wire::PromptShown>(t.inbox(back)).size() == 1);

  play_out(t, Seated{s.code, s.a, back});
  CHECK(h->complete());
}

TEST_CASE("audio path with a scripted recognizer") {
  ManualClock* clock_ref = nullptr;
  std::shared_ptr<ScriptedRecognizer> recognizer;
  Table t(5, {{"en", covol::testing::small_catalog()}}, [&](const std::string&) { return recognizer; });
  clock_ref = &t.clock;
  recognizer = std::make_shared<ScriptedRecognizer>(*clock_ref, std::set<std::string>{"en"});

  const ClientId c = t.gateway.connect();
  const std::string code = t.create(c, json::object());
  t.send(c, wire::JoinSession{code, "Ana", "", std::nullopt});
  t.send(c, wire::Ready{});

  recognizer->enqueue({"um " + right_answer(t, code), 300, {{2, "um"}}});
  const std::vector<std::uint8_t> pcm(640, 0);
  t.send(c, wire::AudioChunkMsg{1, pcm});
  t.send(c, wire::AudioChunkMsg{2, pcm});
  t.send(c, wire::AudioChunkMsg{2, pcm});
  CHECK(error_codes(t.inbox(c)) == std::vector<std::string>{"seq"});
  t.send(c, wire::AudioChunkMsg{3, {1, 2, 3}});
  CHECK(error_codes(t.inbox(c)).back() == "audio_unreadable");
  CHECK(messages_of<wire::PartialTranscript>(t.inbox(c)) == std::vector<wire::PartialTranscript>{{"um"}});
  t.send(c, wire::EndOfSpeech{});
  const auto results = messages_of<wire::RecognitionResult>(t.inbox(c));
  REQUIRE(results.size() == 1);
  CHECK(results[0].matched);
  CHECK(results[0].latency_ms == 300);
  CHECK(t.host(code)->snapshot().phase == Phase::pre_reward_delay);

  // An attempt timeout endpoints a running utterance; its transcript counts.
  while (t.host(code)->snapshot().phase != Phase::awaiting_answer) t.step(code);
  recognizer->enqueue({"nothing useful", 0, {}});
  t.send(c, wire::AudioChunkMsg{1, pcm});
  t.step(code);
  const auto after = messages_of<wire::RecognitionResult>(t.inbox(c));
  REQUIRE(after.size() == 2);
  CHECK(after[1].transcript == "nothing useful");
  CHECK(messages_of<wire::TryAgain>(t.inbox(c)).size() == 1);
}

TEST_CASE("property: random client schedules never break the session") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    CAPTURE(seed);
    auto rng = covol::testing::seeded(seed);
    Table t(seed);
    Seated s = seat_two(t);
    auto h = t.host(s.code);
    for (int step = 0; step < 400 && !h->complete(); ++step) {
      const ClientId who = rng() % 2 ? s.a : s.b;
      switch (rng() % 9) {
        case 0: t.send(who, wire::Transcript{right_answer(t, s.code)}); break;
        case 1: t.send(who, wire::Transcript{"zebra"}); break;
        case 2: t.send(who, wire::EndOfSpeech{}); break;
        case 3: t.send(who, wire::AudioChunkMsg{static_cast<std::uint32_t>(rng() % 4), std::vector<std::uint8_t>(2 * (rng() % 50))}); break;
        case 4: t.send(who, wire::Ready{}); break;
        case 5: t.send(who, wire::Unknown{"noise", json::object()}); break;
        case 6: t.gateway.on_frame(who, {false, "{\"type\":"}); break;
        case 7: t.advance(static_cast<std::int64_t>(rng() % 4000)); break;
        default: t.step(s.code); break;
      }
      const SessionState st = h->snapshot();
      CHECK(st.attempts_on_current <= st.config.max_attempts);
      CHECK(st.active_player == static_cast<int>(st.cursor % 2));
    }
    play_out(t, s);
    REQUIRE(h->complete());
    CHECK(game_messages(t.inbox(s.a)) == game_messages(t.inbox(s.b)));
    for (const auto& p : messages_of<wire::PromptShown>(t.inbox(s.a)))
      CHECK(p.active_player == static_cast<int>(p.task_index % 2));
    CHECK(messages_of<wire::SessionComplete>(t.inbox(s.b)).back().summary == session_summary(h->snapshot()));
    CHECK(t.net.closed.empty());
  }
}
