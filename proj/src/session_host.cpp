#include "covol/session_host.hpp"

#include <algorithm>
#include <random>

namespace covol::server {
namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

constexpr std::string_view kJoinAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
constexpr std::size_t kJoinCodeLength = 4;

bool in_play(Phase phase) { return phase != Phase::lobby && phase != Phase::complete; }

}  // namespace

bool is_valid_join_code(const std::string& code) {
  return code.size() == kJoinCodeLength &&
         std::all_of(code.begin(), code.end(),
                     [](char c) { return kJoinAlphabet.find(c) != std::string_view::npos; });
}

// ---------------------------------------------------------------------------
// SessionHost

SessionHost::SessionHost(SessionState initial, std::string join_code,
                         std::shared_ptr<Recognizer> recognizer, Clock& clock, Sink sink,
                         Offload offload)
    : session_id_(initial.session_id),
      join_code_(std::move(join_code)),
      state_(std::move(initial)),
      recognizer_(std::move(recognizer)),
      clock_(clock),
      sink_(std::move(sink)),
      offload_(std::move(offload)) {
  slot_owner_.resize(state_.players.size());
  ready_.assign(state_.players.size(), false);
}

void SessionHost::set_on_complete(std::function<void(const SessionState&)> callback) {
  std::lock_guard lock(mutex_);
  on_complete_ = std::move(callback);
}

SessionState SessionHost::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::optional<std::int64_t> SessionHost::next_deadline() const {
  std::lock_guard lock(mutex_);
  return timer_due_;
}

bool SessionHost::paused() const {
  std::lock_guard lock(mutex_);
  return paused_remaining_.has_value();
}

bool SessionHost::has_clients() const {
  std::lock_guard lock(mutex_);
  return !clients_.empty();
}

bool SessionHost::complete() const {
  std::lock_guard lock(mutex_);
  return state_.phase == Phase::complete;
}

void SessionHost::send(ClientId client, wire::Message message, bool close_after) {
  if (sink_) sink_(Outbound{client, std::move(message), close_after});
}

void SessionHost::broadcast(const wire::Message& message) {
  for (const auto& [client, slots] : clients_) send(client, message);
}

void SessionHost::error(ClientId client, const std::string& code, const std::string& message) {
  send(client, wire::Message{wire::ErrorMsg{code, message}});
}

wire::Joined SessionHost::roster_message(int player_index) const {
  wire::Joined joined;
  joined.player_index = player_index;
  for (const PlayerSlot& p : state_.players)
    joined.roster.push_back({p.index, p.display_name, p.avatar_id, p.connected});
  return joined;
}

bool SessionHost::any_slot_vacant() const {
  return std::any_of(slot_owner_.begin(), slot_owner_.end(),
                     [](const auto& owner) { return !owner.has_value(); });
}

void SessionHost::apply(const SessionEvent& event) {
  const std::int64_t now = clock_.now_ms();
  Transition next = handle_event(state_, event, now);
  state_ = std::move(next.state);
  for (const Effect& effect : next.effects) {
    if (const auto* timer = std::get_if<effect::StartTimer>(&effect)) {
      timer_due_ = now + timer->duration_ms;
      continue;
    }
    if (auto message = wire::effect_to_message(effect, state_)) {
      if (std::holds_alternative<effect::ShowPrompt>(effect)) last_prompt_ = *message;
      broadcast(*message);
    }
  }
  if (!state_.armed_timer) timer_due_.reset();
  if (state_.phase == Phase::complete) {
    timer_due_.reset();
    utterance_.reset();
    if (on_complete_) on_complete_(state_);
  }
}

bool SessionHost::join(ClientId client, const wire::JoinSession& request) {
  std::lock_guard lock(mutex_);
  if (state_.phase == Phase::complete) {
    error(client, "session_complete", "this session has already finished");
    return false;
  }
  int slot = -1;
  if (request.player_index) {
    const int wanted = *request.player_index;
    if (wanted < 0 || wanted >= static_cast<int>(slot_owner_.size())) {
      error(client, "no_such_slot", "no player slot " + std::to_string(wanted));
      return false;
    }
    if (slot_owner_[static_cast<std::size_t>(wanted)]) {
      error(client, "slot_taken", "player slot " + std::to_string(wanted) + " is in use");
      return false;
    }
    slot = wanted;
  } else {
    for (std::size_t i = 0; i < slot_owner_.size(); ++i)
      if (!slot_owner_[i]) {
        slot = static_cast<int>(i);
        break;
      }
    if (slot < 0) {
      error(client, "session_full", "every player slot is taken");
      return false;
    }
  }

  const PlayerSlot& current = state_.players[static_cast<std::size_t>(slot)];
  PlayerSlot joined{slot,
                    request.display_name.empty() ? current.display_name : request.display_name,
                    request.avatar_id.empty() ? current.avatar_id : request.avatar_id, true};
  // Names stay fixed once the game is running so a rejoin restores the exact
  // state it left.
  if (in_play(state_.phase)) joined = PlayerSlot{slot, current.display_name, current.avatar_id, true};

  slot_owner_[static_cast<std::size_t>(slot)] = client;
  clients_[client].insert(slot);
  apply(event::PlayerJoined{joined});
  broadcast(wire::Message{roster_message(slot)});

  if (in_play(state_.phase)) {
    if (last_prompt_) send(client, *last_prompt_);
    resume_timers_if_possible();
  }
  return true;
}

void SessionHost::disconnect(ClientId client) {
  std::lock_guard lock(mutex_);
  const auto it = clients_.find(client);
  if (it == clients_.end()) return;
  const std::set<int> slots = it->second;
  clients_.erase(it);
  for (int slot : slots) {
    slot_owner_[static_cast<std::size_t>(slot)].reset();
    ready_[static_cast<std::size_t>(slot)] = false;
    apply(event::PlayerLeft{slot});
  }
  if (in_play(state_.phase)) {
    pause_timers();
    for (int slot : slots)
      broadcast(wire::Message{wire::ErrorMsg{
          "paused", state_.players[static_cast<std::size_t>(slot)].display_name + " disconnected"}});
  } else {
    for (int slot : slots) broadcast(wire::Message{roster_message(slot)});
  }
}

void SessionHost::pause_timers() {
  if (!paused_remaining_) {
    const std::int64_t now = clock_.now_ms();
    paused_remaining_ = timer_due_ ? std::max<std::int64_t>(0, *timer_due_ - now) : 0;
    timer_due_.reset();
  }
  // An utterance cut off by a disconnect is dropped; the player answers again
  // after resuming.
  utterance_.reset();
}

void SessionHost::resume_timers_if_possible() {
  if (!paused_remaining_ || any_slot_vacant()) return;
  if (state_.armed_timer) timer_due_ = clock_.now_ms() + *paused_remaining_;
  paused_remaining_.reset();
}

void SessionHost::fire_due_timers() {
  std::lock_guard lock(mutex_);
  while (timer_due_ && !paused_remaining_ && *timer_due_ <= clock_.now_ms() && state_.armed_timer) {
    const TimerId id = *state_.armed_timer;
    timer_due_.reset();
    if (id.kind == TimerKind::attempt && utterance_) {
      // Endpoint the utterance at the timeout; its transcript is the answer.
      finalize_utterance();
      continue;
    }
    apply(event::TimerElapsed{id});
  }
}

bool SessionHost::owns_active_slot(ClientId client) const {
  const auto it = clients_.find(client);
  return it != clients_.end() && it->second.contains(state_.active_player);
}

bool SessionHost::check_turn(ClientId client) {
  if (paused_remaining_) {
    error(client, "paused", "waiting for a player to reconnect");
    return false;
  }
  if (state_.phase == Phase::awaiting_answer && !owns_active_slot(client)) {
    error(client, "not_your_turn",
          "it is " + state_.players[static_cast<std::size_t>(state_.active_player)].display_name +
              "'s turn");
    return false;
  }
  if (state_.phase != Phase::awaiting_answer) {
    error(client, "no_active_prompt", "no prompt is awaiting an answer");
    return false;
  }
  return true;
}

void SessionHost::handle_ready(ClientId client) {
  if (state_.phase != Phase::lobby) {
    error(client, "bad_phase", "ready is only valid in the lobby");
    return;
  }
  for (int slot : clients_[client]) ready_[static_cast<std::size_t>(slot)] = true;
  const bool everyone = !any_slot_vacant() && std::all_of(ready_.begin(), ready_.end(), [](bool r) { return r; });
  if (everyone) apply(event::AllReady{});
}

void SessionHost::handle_audio(ClientId client, const wire::AudioChunkMsg& chunk) {
  if (!check_turn(client)) return;
  if (!utterance_) {
    InFlight fresh;
    try {
      fresh.handle = recognizer_->begin_utterance(state_.config.language);
    } catch (const Error& e) {
      error(client, to_string(e.code()), e.what());
      return;
    }
    fresh.token = ++utterance_serial_;
    utterance_ = std::move(fresh);
  }
  if (utterance_->last_seq && chunk.seq <= *utterance_->last_seq) {
    error(client, "seq", "audio_chunk seq must increase within an utterance");
    return;
  }
  utterance_->last_seq = chunk.seq;
  try {
    if (auto partial = utterance_->handle->push_audio({chunk.pcm, clock_.now_ms()}))
      broadcast(wire::Message{wire::PartialTranscript{*partial}});
  } catch (const Error& e) {
    error(client, to_string(e.code()), e.what());
  }
}

void SessionHost::handle_end_of_speech(ClientId client) {
  if (!check_turn(client)) return;
  if (!utterance_) {
    // Push-to-talk released without audio still counts as an attempt.
    try {
      utterance_ = InFlight{recognizer_->begin_utterance(state_.config.language), {}, ++utterance_serial_};
    } catch (const Error& e) {
      error(client, to_string(e.code()), e.what());
      return;
    }
  }
  finalize_utterance();
}

void SessionHost::finalize_utterance() {
  InFlight job = std::move(*utterance_);
  utterance_.reset();
  const std::uint64_t token = job.token;
  if (!offload_) {
    deliver_transcript(token, job.handle->finalize());
    return;
  }
  // The attempt timer stays disarmed while decoding; the result drives the
  // next transition.
  timer_due_.reset();
  auto handle = std::shared_ptr<Utterance>(std::move(job.handle));
  offload_([weak = weak_from_this(), token, handle] {
    FinalTranscript transcript = handle->finalize();
    if (auto self = weak.lock()) self->deliver_transcript(token, transcript);
  });
}

void SessionHost::deliver_transcript(std::uint64_t token, const FinalTranscript& transcript) {
  std::lock_guard lock(mutex_);
  // Drop results for utterances the session has moved past.
  if (token != utterance_serial_ || state_.phase != Phase::awaiting_answer || paused_remaining_) return;
  ++utterance_serial_;
  apply(event::TranscriptFinal{transcript});
}

void SessionHost::route_client_message(ClientId client, const wire::Message& message) {
  std::lock_guard lock(mutex_);
  if (!clients_.contains(client)) {
    error(client, "not_joined", "join a session first");
    return;
  }
  try {
    std::visit(
        overloaded{
            [&](const wire::Ready&) { handle_ready(client); },
            [&](const wire::AudioChunkMsg& m) { handle_audio(client, m); },
            [&](const wire::EndOfSpeech&) { handle_end_of_speech(client); },
            [&](const wire::Transcript& m) {
              if (!check_turn(client)) return;
              utterance_.reset();
              ++utterance_serial_;
              apply(transcript_injection(state_, m.text, clock_.now_ms()));
            },
            [&](const wire::Unknown&) {},
            [&](const auto& m) {
              error(client, "bad_request", std::string(m.kType) + " is not valid here");
            },
        },
        message.body);
  } catch (const InvalidTransition& e) {
    error(client, "bad_phase", e.what());
  } catch (const Error& e) {
    error(client, to_string(e.code()), e.what());
  }
}

// ---------------------------------------------------------------------------
// Registry

Registry::Registry(RegistryOptions options, Sink sink)
    : options_(std::move(options)),
      sink_(std::move(sink)),
      clock_(options_.clock ? options_.clock : &steady_),
      rng_(options_.seed ? *options_.seed : std::random_device{}()) {
  if (!options_.recognizers) {
    std::set<std::string> languages;
    for (const auto& [language, catalog] : options_.catalogs) languages.insert(language);
    auto scripted = std::make_shared<ScriptedRecognizer>(*clock_, languages);
    options_.recognizers = [scripted](const std::string&) { return scripted; };
  }
}

std::string Registry::fresh_join_code() {
  for (;;) {
    std::string code;
    for (std::size_t i = 0; i < kJoinCodeLength; ++i)
      code += kJoinAlphabet[static_cast<std::size_t>(rng_.below(kJoinAlphabet.size()))];
    if (!by_code_.contains(code)) return code;
  }
}

Registry::Created Registry::create_and_pair(const nlohmann::json& overrides) {
  const SessionConfig config = apply_overrides(options_.defaults, overrides);
  const auto catalog = options_.catalogs.find(config.language);
  if (catalog == options_.catalogs.end())
    throw Error(ErrorCode::catalog_unavailable, "no catalog for language '" + config.language + "'");
  auto recognizer = options_.recognizers(config.language);
  if (!recognizer) throw Error(ErrorCode::recognizer_unavailable, "no recognizer for " + config.language);

  std::lock_guard lock(mutex_);
  char id[17];
  std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(rng_.next()));
  const std::string join_code = fresh_join_code();
  std::vector<PromptTask> tasks = build_prompt_sequence(catalog->second, config, rng_.next());
  auto host = std::make_shared<SessionHost>(create_session(config, std::move(tasks), id), join_code,
                                            std::move(recognizer), *clock_, sink_, options_.offload);
  if (options_.on_complete) host->set_on_complete(options_.on_complete);
  by_id_[id] = host;
  by_code_[join_code] = id;
  return {id, join_code, host};
}

std::shared_ptr<SessionHost> Registry::find(const std::string& id_or_code) const {
  std::lock_guard lock(mutex_);
  if (auto it = by_id_.find(id_or_code); it != by_id_.end()) return it->second;
  std::string code = id_or_code;
  std::transform(code.begin(), code.end(), code.begin(), [](unsigned char c) { return std::toupper(c); });
  if (auto it = by_code_.find(code); it != by_code_.end()) return by_id_.at(it->second);
  return nullptr;
}

void Registry::remove(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  const auto it = by_id_.find(session_id);
  if (it == by_id_.end()) return;
  by_code_.erase(it->second->join_code());
  by_id_.erase(it);
}

std::vector<std::shared_ptr<SessionHost>> Registry::hosts() const {
  std::lock_guard lock(mutex_);
  std::vector<std::shared_ptr<SessionHost>> out;
  for (const auto& [id, host] : by_id_) out.push_back(host);
  return out;
}

std::size_t Registry::size() const {
  std::lock_guard lock(mutex_);
  return by_id_.size();
}

std::vector<std::string> Registry::languages() const {
  std::vector<std::string> out;
  for (const auto& [language, catalog] : options_.catalogs) out.push_back(language);
  return out;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(RegistryOptions options, Transport& transport)
    : transport_(transport),
      registry_(std::move(options), [this](const Outbound& out) {
        transport_.send(out.client, wire::encode(out.message));
        if (out.close_after) transport_.close(out.client);
      }) {}

ClientId Gateway::connect() {
  std::lock_guard lock(mutex_);
  return next_client_++;
}

void Gateway::reply(ClientId client, wire::Message message, bool close_after) {
  transport_.send(client, wire::encode(message));
  if (close_after) transport_.close(client);
}

void Gateway::on_frame(ClientId client, const wire::Frame& frame) {
  wire::Message message;
  try {
    message = wire::decode(frame);
  } catch (const wire::MalformedFrame& e) {
    reply(client, wire::Message{wire::ErrorMsg{"malformed", e.what()}});
    return;
  }
  if (message.protocol_version != wire::kProtocolVersion) {
    reply(client,
          wire::Message{wire::ErrorMsg{"version", "server speaks protocol version " +
                                                      std::to_string(wire::kProtocolVersion)}},
          true);
    return;
  }

  std::shared_ptr<SessionHost> host;
  {
    std::lock_guard lock(mutex_);
    if (auto it = bound_.find(client); it != bound_.end()) host = it->second;
  }

  if (const auto* create = std::get_if<wire::CreateSession>(&message.body)) {
    try {
      const auto created = registry_.create_and_pair(create->config);
      reply(client, wire::Message{wire::SessionCreated{created.session_id, created.join_code}});
    } catch (const Error& e) {
      reply(client, wire::Message{wire::ErrorMsg{to_string(e.code()), e.what()}});
    }
    return;
  }
  if (const auto* join = std::get_if<wire::JoinSession>(&message.body)) {
    auto target = registry_.find(join->session_id);
    if (!target) {
      reply(client, wire::Message{wire::ErrorMsg{"unknown_session", "no session " + join->session_id}});
      return;
    }
    if (host && host != target) {
      reply(client, wire::Message{wire::ErrorMsg{"bad_request", "already joined another session"}});
      return;
    }
    {
      std::lock_guard lock(mutex_);
      bound_[client] = target;
    }
    if (!target->join(client, *join)) release(client, false);
    return;
  }
  if (std::holds_alternative<wire::Leave>(message.body)) {
    release(client, true);
    return;
  }
  if (std::holds_alternative<wire::Unknown>(message.body)) return;
  if (!host) {
    reply(client, wire::Message{wire::ErrorMsg{"not_joined", "join a session first"}});
    return;
  }
  host->route_client_message(client, message);
}

void Gateway::release(ClientId client, bool notify_host) {
  std::shared_ptr<SessionHost> host;
  {
    std::lock_guard lock(mutex_);
    auto it = bound_.find(client);
    if (it == bound_.end()) return;
    host = it->second;
    bound_.erase(it);
  }
  if (notify_host) host->disconnect(client);
  if (!host->has_clients()) {
    const SessionState state = host->snapshot();
    // TODO: expire sessions left paused mid-game after an idle timeout; they
    // currently stay registered until the process exits.
    if (state.phase == Phase::lobby || state.phase == Phase::complete) registry_.remove(host->session_id());
  }
}

void Gateway::on_disconnect(ClientId client) { release(client, true); }

void Gateway::tick() {
  for (const auto& host : registry_.hosts()) host->fire_due_timers();
}

}  // namespace covol::server
