// Shared test scaffolding: a simulated-time driver for the session state
// machine, independent oracles and random generators.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "covol/catalog.hpp"
#include "covol/session.hpp"

namespace covol::testing {

inline std::filesystem::path data_dir() { return COVOL_TEST_DATA_DIR; }

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

// ---------------------------------------------------------------------------
// Oracles

// Plain recursive Levenshtein over words, no memo, no shared code with the
// library's DP.
inline std::size_t brute_edit_distance(const std::vector<std::string>& a, std::size_t i,
                                       const std::vector<std::string>& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  const std::size_t sub = brute_edit_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const std::size_t del = brute_edit_distance(a, i + 1, b, j) + 1;
  const std::size_t ins = brute_edit_distance(a, i, b, j + 1) + 1;
  return std::min({sub, del, ins});
}

inline std::size_t brute_edit_distance(const std::vector<std::string>& a,
                                       const std::vector<std::string>& b) {
  return brute_edit_distance(a, 0, b, 0);
}

// ASCII-only reference tokenizer: enough for generated inputs that avoid
// non-ASCII text.
inline std::vector<std::string> ascii_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    std::size_t b = 0, e = current.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(current[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(current[e - 1]))) --e;
    if (e > b) out.push_back(current.substr(b, e - b));
    current.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c)))
      flush();
    else
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  flush();
  return out;
}

struct OracleMatch {
  bool matched = false;
  std::size_t answer = 0;
  std::size_t index = 0;
};

// Every (position, answer) pair in position-major order; the first hit is
// the answer.
inline OracleMatch oracle_match(const std::string& transcript, const std::vector<std::string>& accepted) {
  const auto words = ascii_tokens(transcript);
  for (std::size_t pos = 0; pos < words.size(); ++pos) {
    for (std::size_t k = 0; k < accepted.size(); ++k) {
      const auto needle = ascii_tokens(accepted[k]);
      if (needle.empty() || pos + needle.size() > words.size()) continue;
      bool all = true;
      for (std::size_t w = 0; w < needle.size(); ++w) all = all && words[pos + w] == needle[w];
      if (all) return {true, k, pos};
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Fixtures

inline PromptTask label_task(std::string id, std::vector<std::string> labels) {
  PromptTask t;
  t.object_id = id;
  t.mode = {PromptMode::label, ""};
  t.expected = std::move(labels);
  t.display_prompt = "What is this?";
  t.image_ref = "images/" + id + ".svg";
  return t;
}

inline std::vector<PromptTask> fruit_tasks(std::size_t n) {
  const std::vector<PromptTask> pool = {
      label_task("apple", {"apple", "apples", "fruit"}),
      label_task("dog", {"dog", "doggy", "puppy"}),
      label_task("ball", {"ball"}),
  };
  std::vector<PromptTask> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[i % pool.size()]);
  return out;
}

inline Catalog small_catalog() {
  Catalog c;
  c.language = "en";
  c.objects = {
      {"apple", "images/apple.svg", std::nullopt, {"apple", "apples", "fruit"}, {{"color", {"red", "green"}}}, {{"en", "What is this?"}}},
      {"dog", "images/dog.svg", "sounds/dog.wav", {"dog", "doggy"}, {}, {{"en", "What is this?"}}},
      {"ball", "images/ball.svg", std::nullopt, {"ball"}, {{"color", {"blue"}}}, {{"en", "What is this?"}}},
      {"cat", "images/cat.svg", "sounds/cat.wav", {"cat", "kitty"}, {}, {{"en", "What is this?"}}},
  };
  return c;
}

// ---------------------------------------------------------------------------
// Simulated-time session driver

struct TimedEffect {
  std::int64_t at = 0;
  Effect effect;
};

struct TimedEvent {
  std::int64_t at = 0;
  SessionEvent event;
};

/// Runs the pure state machine the way a host would: applies events at the
/// current simulated time, remembers the armed timer and fires it on demand.
class Driver {
 public:
  explicit Driver(SessionState initial, std::int64_t start_ms = 0) : state_(std::move(initial)), now_(start_ms) {}

  static Driver started(const SessionConfig& config, std::vector<PromptTask> tasks, std::int64_t start_ms = 0) {
    Driver d(create_session(config, std::move(tasks), "test"), start_ms);
    for (int i = 0; i < config.player_count; ++i) d.feed(event::PlayerJoined{PlayerSlot{i, "", "", true}});
    d.feed(event::AllReady{});
    return d;
  }

  void feed(const SessionEvent& e) {
    events_.push_back({now_, e});
    Transition t = handle_event(state_, e, now_);
    state_ = std::move(t.state);
    for (auto& effect : t.effects) {
      if (const auto* timer = std::get_if<effect::StartTimer>(&effect)) due_ = now_ + timer->duration_ms;
      effects_.push_back({now_, std::move(effect)});
    }
    if (!state_.armed_timer) due_.reset();
  }

  // Fires the armed timer at its deadline.
  void fire() {
    now_ = std::max(now_, *due_);
    const TimerId id = *state_.armed_timer;
    due_.reset();
    feed(event::TimerElapsed{id});
  }

  // Fires timers until a prompt is awaiting an answer or the game is over.
  void settle() {
    while (state_.phase != Phase::awaiting_answer && state_.phase != Phase::complete) fire();
  }

  // Speech ends after `think_ms`; the transcript arrives `latency_ms` later.
  void answer(const std::string& text, std::int64_t think_ms = 0, std::int64_t latency_ms = 0) {
    const std::int64_t end = now_ + think_ms;
    now_ = end + latency_ms;
    feed(event::TranscriptFinal{FinalTranscript{text, end, now_}});
  }

  void time_out() { fire(); }

  void advance(std::int64_t ms) { now_ += ms; }

  const SessionState& state() const { return state_; }
  std::int64_t now() const { return now_; }
  std::optional<std::int64_t> due() const { return due_; }
  const std::vector<TimedEffect>& effects() const { return effects_; }
  const std::vector<TimedEvent>& events() const { return events_; }

  template <class E>
  std::vector<TimedEffect> effects_of() const {
    std::vector<TimedEffect> out;
    for (const auto& te : effects_)
      if (std::holds_alternative<E>(te.effect)) out.push_back(te);
    return out;
  }

 private:
  SessionState state_;
  std::int64_t now_;
  std::optional<std::int64_t> due_;
  std::vector<TimedEffect> effects_;
  std::vector<TimedEvent> events_;
};

enum class Move { correct, wrong, timeout };

/// Plays one whole session, choosing each attempt's outcome and timings from
/// `rng`. Returns the driver at completion.
inline Driver play_random_session(const SessionConfig& config, std::mt19937_64& rng,
                                  std::function<Move(std::mt19937_64&)> choose) {
  Driver d = Driver::started(config, fruit_tasks(static_cast<std::size_t>(config.prompts_per_session)),
                             static_cast<std::int64_t>(rng() % 100000));
  std::size_t guard = 0;
  while (d.state().phase != Phase::complete) {
    d.settle();
    if (d.state().phase == Phase::complete) break;
    if (++guard > 10000) throw std::runtime_error("session did not terminate");
    const Move move = choose(rng);
    // Keep speech plus decoding inside the attempt window; a host would fire
    // the timeout first otherwise.
    const auto half = static_cast<std::uint64_t>(std::max<std::int64_t>(1, config.attempt_timeout_ms / 2));
    const auto think = static_cast<std::int64_t>(rng() % half);
    const auto latency = static_cast<std::int64_t>(rng() % std::min<std::uint64_t>(half, 6000));
    const auto& task = d.state().current_task();
    switch (move) {
      case Move::correct: d.answer("it is " + task.expected[rng() % task.expected.size()], think, latency); break;
      case Move::wrong: d.answer("banana", think, latency); break;
      case Move::timeout: d.time_out(); break;
    }
  }
  return d;
}

inline std::mt19937_64 seeded(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace covol::testing
