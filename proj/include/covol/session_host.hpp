#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "covol/asr.hpp"
#include "covol/catalog.hpp"
#include "covol/clock.hpp"
#include "covol/detail/random.hpp"
#include "covol/session.hpp"
#include "covol/wire.hpp"

namespace covol::server {

using ClientId = std::uint64_t;

struct Outbound {
  ClientId client = 0;
  wire::Message message;
  bool close_after = false;
};

using Sink = std::function<void(const Outbound&)>;
// Runs blocking work (utterance decoding) off the session's event path.
using Offload = std::function<void(std::function<void()>)>;

/// One live game: the state machine plus the clients bound to its player
/// slots, the armed timer and the in-flight utterance. Every entry point
/// takes the host's lock, so events for one session never overlap, and
/// outbound messages are handed to the sink under that same lock to keep
/// their order identical for every client.
class SessionHost : public std::enable_shared_from_this<SessionHost> {
 public:
  SessionHost(SessionState initial, std::string join_code, std::shared_ptr<Recognizer> recognizer,
              Clock& clock, Sink sink, Offload offload = {});

  const std::string& session_id() const noexcept { return session_id_; }
  const std::string& join_code() const noexcept { return join_code_; }

  /// Binds the client to a player slot. False (after an error reply) when
  /// the request cannot be honored.
  bool join(ClientId client, const wire::JoinSession& request);
  /// Routes one decoded client message for a client already joined here.
  void route_client_message(ClientId client, const wire::Message& message);
  void disconnect(ClientId client);
  /// Fires every timer whose deadline has passed on the host clock.
  void fire_due_timers();

  SessionState snapshot() const;
  std::optional<std::int64_t> next_deadline() const;
  bool paused() const;
  bool has_clients() const;
  bool complete() const;

  void set_on_complete(std::function<void(const SessionState&)> callback);

 private:
  struct InFlight {
    std::unique_ptr<Utterance> handle;
    std::optional<std::uint32_t> last_seq;
    std::uint64_t token = 0;
  };

  void apply(const SessionEvent& event);
  void broadcast(const wire::Message& message);
  void send(ClientId client, wire::Message message, bool close_after = false);
  void error(ClientId client, const std::string& code, const std::string& message);
  bool owns_active_slot(ClientId client) const;
  bool check_turn(ClientId client);
  void handle_ready(ClientId client);
  void handle_audio(ClientId client, const wire::AudioChunkMsg& chunk);
  void handle_end_of_speech(ClientId client);
  void finalize_utterance();
  void deliver_transcript(std::uint64_t token, const FinalTranscript& transcript);
  void pause_timers();
  void resume_timers_if_possible();
  bool any_slot_vacant() const;
  wire::Joined roster_message(int player_index) const;

  mutable std::recursive_mutex mutex_;
  std::string session_id_;
  std::string join_code_;
  SessionState state_;
  std::shared_ptr<Recognizer> recognizer_;
  Clock& clock_;
  Sink sink_;
  Offload offload_;
  std::function<void(const SessionState&)> on_complete_;

  std::map<ClientId, std::set<int>> clients_;
  std::vector<std::optional<ClientId>> slot_owner_;
  std::vector<bool> ready_;
  std::optional<std::int64_t> timer_due_;
  std::optional<std::int64_t> paused_remaining_;
  std::optional<InFlight> utterance_;
  std::uint64_t utterance_serial_ = 0;
  std::optional<wire::Message> last_prompt_;
};

using RecognizerFactory = std::function<std::shared_ptr<Recognizer>(const std::string& language)>;

struct RegistryOptions {
  std::map<std::string, Catalog> catalogs;  // keyed by language
  SessionConfig defaults;
  RecognizerFactory recognizers;            // unset: scripted, every catalog language
  Clock* clock = nullptr;                   // unset: steady clock
  std::optional<std::uint64_t> seed;        // unset: random_device
  Offload offload;
  std::function<void(const SessionState&)> on_complete;
};

/// Live sessions by id and by join code.
class Registry {
 public:
  Registry(RegistryOptions options, Sink sink);

  struct Created {
    std::string session_id;
    std::string join_code;
    std::shared_ptr<SessionHost> host;
  };

  /// Throws Error(config_invalid) or Error(catalog_unavailable).
  Created create_and_pair(const nlohmann::json& overrides);
  std::shared_ptr<SessionHost> find(const std::string& id_or_code) const;
  void remove(const std::string& session_id);
  std::vector<std::shared_ptr<SessionHost>> hosts() const;
  std::size_t size() const;
  std::vector<std::string> languages() const;
  Clock& clock() const { return *clock_; }

 private:
  std::string fresh_join_code();

  RegistryOptions options_;
  Sink sink_;
  SteadyClock steady_;
  Clock* clock_;
  mutable std::mutex mutex_;
  detail::Rng rng_;
  std::map<std::string, std::shared_ptr<SessionHost>> by_id_;
  std::map<std::string, std::string> by_code_;
};

bool is_valid_join_code(const std::string& code);

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(ClientId client, const wire::Frame& frame) = 0;
  virtual void close(ClientId client) = 0;
};

/// Connection-level front door: decodes frames, checks the protocol
/// version, handles session creation and joining, and forwards the rest to
/// the client's session.
class Gateway {
 public:
  Gateway(RegistryOptions options, Transport& transport);

  ClientId connect();
  void on_frame(ClientId client, const wire::Frame& frame);
  void on_disconnect(ClientId client);
  /// Fires due timers in every session.
  void tick();

  Registry& registry() { return registry_; }

 private:
  void reply(ClientId client, wire::Message message, bool close_after = false);
  void release(ClientId client, bool notify_host);

  Transport& transport_;
  Registry registry_;
  std::mutex mutex_;
  ClientId next_client_ = 1;
  std::map<ClientId, std::shared_ptr<SessionHost>> bound_;
};

}  // namespace covol::server
