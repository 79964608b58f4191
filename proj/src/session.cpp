#include "covol/session.hpp"

#include <algorithm>

namespace covol {
namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

bool two_player(const SessionState& s) { return s.config.player_count == 2; }

Summary summarize(const SessionState& s) {
  Summary summary;
  for (const PlayerSlot& slot : s.players)
    summary.players.push_back({slot.index, slot.display_name, 0, 0, 0});
  for (const PromptOutcome& outcome : s.metrics) {
    PlayerSummary& player = summary.players.at(static_cast<std::size_t>(outcome.player_index));
    ++player.tasks;
    if (outcome.result == OutcomeResult::correct) {
      ++player.correct;
      ++summary.total_correct;
    } else {
      ++player.passed;
      ++summary.total_passed;
    }
  }
  summary.total_tasks = static_cast<int>(s.metrics.size());
  summary.rewards_shown = s.rewards_shown;
  if (s.recognition_count > 0)
    summary.mean_recognition_latency_ms =
        static_cast<double>(s.recognition_latency_total_ms) / static_cast<double>(s.recognition_count);
  summary.total_duration_ms = s.completed_at_ms - s.started_at_ms;
  return summary;
}

// Mutable working copy of a transition under construction.
struct Step {
  SessionState s;
  std::vector<Effect> effects;
  std::int64_t now;

  void arm(TimerKind kind, std::int64_t duration) {
    const TimerId id{kind, ++s.timer_serial};
    s.armed_timer = id;
    effects.emplace_back(effect::StartTimer{id, std::max<std::int64_t>(0, duration)});
  }

  void show_prompt() {
    s.phase = Phase::awaiting_answer;
    s.attempts_on_current = 0;
    s.last_transcript.clear();
    s.last_latency_ms = 0;
    s.last_prompt_at_ms = now;
    effects.emplace_back(effect::ShowPrompt{s.cursor, s.tasks[s.cursor], s.active_player});
    arm(TimerKind::attempt, s.config.attempt_timeout_ms);
  }

  void advance(bool after_pass) {
    s.armed_timer.reset();
    ++s.cursor;
    if (s.cursor == s.tasks.size()) {
      s.phase = Phase::complete;
      s.completed_at_ms = now;
      if (two_player(s)) s.active_player = static_cast<int>(s.cursor % 2);
      effects.emplace_back(effect::EndSession{summarize(s)});
      return;
    }
    if (two_player(s)) {
      s.active_player = 1 - s.active_player;
      effects.emplace_back(effect::AdvanceTurn{s.active_player});
    }
    const std::int64_t gap = *s.last_prompt_at_ms + s.config.pictogram_interval_ms - now;
    if (gap > 0) {
      s.phase = after_pass ? Phase::passed_notice : Phase::prompting;
      arm(TimerKind::pacing, gap);
    } else {
      show_prompt();
    }
  }

  void record(OutcomeResult result, std::optional<std::string> label) {
    PromptOutcome outcome{s.cursor,        s.active_player,      result,
                          s.attempts_on_current, s.last_transcript, std::move(label),
                          s.last_latency_ms};
    s.metrics.push_back(outcome);
    effects.emplace_back(effect::RecordOutcome{std::move(outcome)});
  }

  void failed_attempt() {
    ++s.attempts_on_current;
    if (s.attempts_on_current < s.config.max_attempts) {
      effects.emplace_back(effect::ShowTryAgain{s.config.max_attempts - s.attempts_on_current});
      arm(TimerKind::attempt, s.config.attempt_timeout_ms);
      return;
    }
    record(OutcomeResult::passed, std::nullopt);
    effects.emplace_back(effect::ShowPassed{});
    advance(true);
  }

  void transcript(const FinalTranscript& t) {
    const PromptTask& task = s.tasks[s.cursor];
    MatchResult m = match(t.text, task.expected);
    s.last_transcript = t.text;
    s.last_latency_ms = t.latency_ms();
    ++s.recognition_count;
    s.recognition_latency_total_ms += t.latency_ms();
    effects.emplace_back(effect::ReportRecognition{s.active_player, t.text, m, t.latency_ms()});
    if (!m.matched) {
      failed_attempt();
      return;
    }
    ++s.attempts_on_current;
    ++s.total_correct;
    ++s.correct_counts[static_cast<std::size_t>(s.active_player)];
    record(OutcomeResult::correct, m.matched_label);
    s.phase = Phase::pre_reward_delay;
    // The feedback delay runs from the moment the transcript arrived; time it
    // spent queued before reaching us counts toward it.
    const std::int64_t queued = std::max<std::int64_t>(0, now - t.decoded_at_ms);
    arm(TimerKind::feedback_delay, s.config.min_feedback_delay_ms - queued);
  }

  void feedback_due() {
    s.armed_timer.reset();
    if (s.total_correct % s.config.reward_every_n_correct == 0) {
      ++s.rewards_shown;
      s.phase = Phase::reward;
      effects.emplace_back(effect::ShowReward{s.config.reward_icon, s.config.reward_duration_ms});
      arm(TimerKind::reward, s.config.reward_duration_ms);
    } else {
      advance(false);
    }
  }
};

}  // namespace

const char* to_string(Phase phase) noexcept {
  switch (phase) {
    case Phase::lobby: return "lobby";
    case Phase::prompting: return "prompting";
    case Phase::awaiting_answer: return "awaiting_answer";
    case Phase::pre_reward_delay: return "pre_reward_delay";
    case Phase::reward: return "reward";
    case Phase::passed_notice: return "passed_notice";
    case Phase::complete: return "complete";
  }
  return "unknown";
}

const char* to_string(TimerKind kind) noexcept {
  switch (kind) {
    case TimerKind::attempt: return "attempt";
    case TimerKind::feedback_delay: return "feedback_delay";
    case TimerKind::reward: return "reward";
    case TimerKind::pacing: return "pacing";
  }
  return "unknown";
}

const char* to_string(OutcomeResult result) noexcept {
  return result == OutcomeResult::correct ? "correct" : "passed";
}

std::string default_player_name(int index) { return "Player " + std::to_string(index + 1); }

const char* event_name(const SessionEvent& event) noexcept {
  return std::visit(overloaded{
                        [](const event::PlayerJoined&) { return "PlayerJoined"; },
                        [](const event::PlayerLeft&) { return "PlayerLeft"; },
                        [](const event::AllReady&) { return "AllReady"; },
                        [](const event::TranscriptFinal&) { return "TranscriptFinal"; },
                        [](const event::AttemptTimeout&) { return "AttemptTimeout"; },
                        [](const event::TimerElapsed&) { return "TimerElapsed"; },
                    },
                    event);
}

InvalidTransition::InvalidTransition(Phase phase, std::string event, const std::string& detail)
    : Error(ErrorCode::invalid_transition,
            std::string("event ") + event + " is not valid in phase " + to_string(phase) +
                (detail.empty() ? "" : " (" + detail + ")")),
      phase_(phase),
      event_(std::move(event)) {}

SessionState create_session(const SessionConfig& config, std::vector<PromptTask> tasks,
                            std::string session_id) {
  validate_config(config);
  if (tasks.size() != static_cast<std::size_t>(config.prompts_per_session))
    throw Error(ErrorCode::task_count_mismatch,
                "expected " + std::to_string(config.prompts_per_session) + " tasks, got " +
                    std::to_string(tasks.size()));
  SessionState s;
  s.session_id = std::move(session_id);
  s.config = config;
  s.tasks = std::move(tasks);
  for (int i = 0; i < config.player_count; ++i)
    s.players.push_back({i, default_player_name(i), "avatar" + std::to_string(i + 1), false});
  s.correct_counts.assign(static_cast<std::size_t>(config.player_count), 0);
  return s;
}

Transition handle_event(const SessionState& state, const SessionEvent& ev, std::int64_t now_ms) {
  Step step{state, {}, now_ms};
  SessionState& s = step.s;
  auto reject = [&](const std::string& detail = {}) {
    throw InvalidTransition(state.phase, event_name(ev), detail);
  };

  std::visit(
      overloaded{
          [&](const event::PlayerJoined& e) {
            if (e.slot.index < 0 || e.slot.index >= s.config.player_count) reject("no such player slot");
            PlayerSlot& slot = s.players[static_cast<std::size_t>(e.slot.index)];
            slot = e.slot;
            if (slot.display_name.empty()) slot.display_name = default_player_name(slot.index);
            slot.connected = true;
          },
          [&](const event::PlayerLeft& e) {
            if (e.player_index < 0 || e.player_index >= s.config.player_count) reject("no such player slot");
            s.players[static_cast<std::size_t>(e.player_index)].connected = false;
          },
          [&](const event::AllReady&) {
            if (s.phase != Phase::lobby) reject();
            for (const PlayerSlot& p : s.players)
              if (!p.connected) reject("not every player has joined");
            s.started_at_ms = now_ms;
            step.show_prompt();
          },
          [&](const event::TranscriptFinal& e) {
            if (s.phase != Phase::awaiting_answer) reject();
            step.transcript(e.transcript);
          },
          [&](const event::AttemptTimeout&) {
            if (s.phase != Phase::awaiting_answer) reject();
            step.failed_attempt();
          },
          [&](const event::TimerElapsed& e) {
            if (!s.armed_timer || *s.armed_timer != e.timer) reject("timer not armed");
            switch (e.timer.kind) {
              case TimerKind::attempt:
                if (s.phase != Phase::awaiting_answer) reject();
                step.failed_attempt();
                break;
              case TimerKind::feedback_delay:
                if (s.phase != Phase::pre_reward_delay) reject();
                step.feedback_due();
                break;
              case TimerKind::reward:
                if (s.phase != Phase::reward) reject();
                step.advance(false);
                break;
              case TimerKind::pacing:
                if (s.phase != Phase::prompting && s.phase != Phase::passed_notice) reject();
                step.show_prompt();
                break;
            }
          },
      },
      ev);
  return {std::move(step.s), std::move(step.effects)};
}

Summary session_summary(const SessionState& state) {
  if (state.phase != Phase::complete)
    throw Error(ErrorCode::session_not_complete, "session is still in phase " + std::string(to_string(state.phase)));
  return summarize(state);
}

SessionEvent transcript_injection(const SessionState& state, const std::string& text, std::int64_t now_ms) {
  if (state.phase != Phase::awaiting_answer)
    throw Error(ErrorCode::no_active_prompt, "no prompt is awaiting an answer");
  return event::TranscriptFinal{FinalTranscript{text, now_ms, now_ms}};
}

}  // namespace covol
