#include "covol/wire.hpp"

#include <utility>

namespace covol::wire {
using nlohmann::json;

namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

template <typename T>
T field(const json& payload, const char* key) {
  const auto it = payload.find(key);
  if (it == payload.end()) throw MalformedFrame(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw MalformedFrame(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& payload, const char* key) {
  const auto it = payload.find(key);
  if (it == payload.end() || it->is_null()) return std::nullopt;
  return field<T>(payload, key);
}

template <typename T>
json optional_json(const std::optional<T>& value) {
  return value ? json(*value) : json(nullptr);
}

// Payload writers ----------------------------------------------------------

json payload_of(const CreateSession& m) { return {{"config", m.config}}; }
json payload_of(const JoinSession& m) {
  return {{"session_id", m.session_id}, {"display_name", m.display_name},
          {"avatar_id", m.avatar_id}, {"player_index", optional_json(m.player_index)}};
}
json payload_of(const Transcript& m) { return {{"text", m.text}}; }
json payload_of(const SessionCreated& m) {
  return {{"session_id", m.session_id}, {"join_code", m.join_code}};
}
json payload_of(const Joined& m) {
  json roster = json::array();
  for (const RosterEntry& r : m.roster)
    roster.push_back({{"player_index", r.player_index}, {"display_name", r.display_name},
                      {"avatar_id", r.avatar_id}, {"connected", r.connected}});
  return {{"player_index", m.player_index}, {"roster", roster}};
}
json payload_of(const PromptShown& m) {
  return {{"task_index", m.task_index}, {"object_id", m.object_id},   {"image_ref", m.image_ref},
          {"sound_ref", optional_json(m.sound_ref)},                 {"prompt_text", m.prompt_text},
          {"mode", m.mode},             {"attribute", m.attribute},  {"active_player", m.active_player}};
}
json payload_of(const PartialTranscript& m) { return {{"text", m.text}}; }
json payload_of(const RecognitionResult& m) {
  return {{"matched", m.matched}, {"matched_label", optional_json(m.matched_label)},
          {"transcript", m.transcript}, {"latency_ms", m.latency_ms}};
}
json payload_of(const TryAgain& m) { return {{"attempts_left", m.attempts_left}}; }
json payload_of(const Reward& m) { return {{"icon", m.icon}, {"duration_ms", m.duration_ms}}; }
json payload_of(const TurnChanged& m) {
  return {{"active_player", m.active_player}, {"display_name", m.display_name}};
}
json payload_of(const SessionComplete& m) { return {{"summary", summary_to_json(m.summary)}}; }
json payload_of(const ErrorMsg& m) { return {{"code", m.code}, {"message", m.message}}; }
json payload_of(const Unknown& m) { return m.payload; }
template <typename Empty>
json payload_of(const Empty&) {
  return json::object();
}

// Payload readers ----------------------------------------------------------

template <typename T>
T read(const json&) {
  return T{};  // tags without fields
}
template <>
CreateSession read<CreateSession>(const json& p) {
  CreateSession m;
  if (auto it = p.find("config"); it != p.end() && !it->is_null()) {
    if (!it->is_object()) throw MalformedFrame("field 'config' must be an object");
    m.config = *it;
  }
  return m;
}
template <>
JoinSession read<JoinSession>(const json& p) {
  return {field<std::string>(p, "session_id"),
          optional_field<std::string>(p, "display_name").value_or(""),
          optional_field<std::string>(p, "avatar_id").value_or(""),
          optional_field<int>(p, "player_index")};
}
template <>
Transcript read<Transcript>(const json& p) {
  return {field<std::string>(p, "text")};
}
template <>
SessionCreated read<SessionCreated>(const json& p) {
  return {field<std::string>(p, "session_id"), field<std::string>(p, "join_code")};
}
template <>
Joined read<Joined>(const json& p) {
  Joined m;
  m.player_index = field<int>(p, "player_index");
  const json roster = field<json>(p, "roster");
  if (!roster.is_array()) throw MalformedFrame("field 'roster' must be a list");
  for (const json& r : roster)
    m.roster.push_back({field<int>(r, "player_index"), field<std::string>(r, "display_name"),
                        field<std::string>(r, "avatar_id"), field<bool>(r, "connected")});
  return m;
}
template <>
PromptShown read<PromptShown>(const json& p) {
  PromptShown m;
  m.task_index = field<std::size_t>(p, "task_index");
  m.object_id = field<std::string>(p, "object_id");
  m.image_ref = field<std::string>(p, "image_ref");
  m.sound_ref = optional_field<std::string>(p, "sound_ref");
  m.prompt_text = field<std::string>(p, "prompt_text");
  m.mode = field<std::string>(p, "mode");
  m.attribute = optional_field<std::string>(p, "attribute").value_or("");
  m.active_player = field<int>(p, "active_player");
  return m;
}
template <>
PartialTranscript read<PartialTranscript>(const json& p) {
  return {field<std::string>(p, "text")};
}
template <>
RecognitionResult read<RecognitionResult>(const json& p) {
  return {field<bool>(p, "matched"), optional_field<std::string>(p, "matched_label"),
          field<std::string>(p, "transcript"), field<std::int64_t>(p, "latency_ms")};
}
template <>
TryAgain read<TryAgain>(const json& p) {
  return {field<int>(p, "attempts_left")};
}
template <>
Reward read<Reward>(const json& p) {
  return {field<std::string>(p, "icon"), field<std::int64_t>(p, "duration_ms")};
}
template <>
TurnChanged read<TurnChanged>(const json& p) {
  return {field<int>(p, "active_player"), field<std::string>(p, "display_name")};
}
template <>
SessionComplete read<SessionComplete>(const json& p) {
  return {summary_from_json(field<json>(p, "summary"))};
}
template <>
ErrorMsg read<ErrorMsg>(const json& p) {
  return {field<std::string>(p, "code"), field<std::string>(p, "message")};
}

template <std::size_t I = 0>
std::optional<Body> decode_known(std::string_view type, const json& payload) {
  if constexpr (I == std::variant_size_v<Body>) {
    return std::nullopt;
  } else {
    using T = std::variant_alternative_t<I, Body>;
    if constexpr (!std::is_same_v<T, Unknown> && !std::is_same_v<T, AudioChunkMsg>) {
      if (T::kType == type) return Body{read<T>(payload)};
    }
    return decode_known<I + 1>(type, payload);
  }
}

Frame encode_audio(const AudioChunkMsg& m) {
  Frame frame{true, {}};
  frame.data.reserve(4 + m.pcm.size());
  for (int shift = 24; shift >= 0; shift -= 8) frame.data.push_back(static_cast<char>((m.seq >> shift) & 0xFF));
  frame.data.append(reinterpret_cast<const char*>(m.pcm.data()), m.pcm.size());
  return frame;
}

Message decode_audio(const std::string& data) {
  if (data.size() < 4) throw MalformedFrame("binary frame shorter than its sequence header");
  AudioChunkMsg m;
  for (int i = 0; i < 4; ++i) m.seq = (m.seq << 8) | static_cast<std::uint8_t>(data[static_cast<std::size_t>(i)]);
  m.pcm.assign(data.begin() + 4, data.end());
  return {m, kProtocolVersion};
}

}  // namespace

std::string_view type_of(const Body& body) {
  return std::visit(overloaded{[](const Unknown& m) -> std::string_view { return m.type; },
                               [](const auto& m) -> std::string_view { return m.kType; }},
                    body);
}

Frame encode(const Message& message) {
  if (const auto* audio = std::get_if<AudioChunkMsg>(&message.body)) return encode_audio(*audio);
  const json payload = std::visit([](const auto& m) { return payload_of(m); }, message.body);
  const json doc = {{"type", type_of(message.body)},
                    {"protocol_version", message.protocol_version},
                    {"payload", payload}};
  return {false, doc.dump()};
}

Message decode(const Frame& frame) {
  if (frame.binary) return decode_audio(frame.data);

  const json doc = json::parse(frame.data, nullptr, false);
  if (doc.is_discarded()) throw MalformedFrame("not valid JSON");
  if (!doc.is_object()) throw MalformedFrame("message must be a JSON object");
  const auto type_it = doc.find("type");
  if (type_it == doc.end() || !type_it->is_string()) throw MalformedFrame("missing type");
  const auto version_it = doc.find("protocol_version");
  if (version_it == doc.end() || !version_it->is_number_integer())
    throw MalformedFrame("missing protocol_version");

  json payload = json::object();
  if (const auto it = doc.find("payload"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) throw MalformedFrame("payload must be an object");
    payload = *it;
  }
  const auto type = type_it->get<std::string>();
  if (type == AudioChunkMsg::kType) throw MalformedFrame("audio_chunk must be sent as a binary frame");

  Message message;
  message.protocol_version = version_it->get<int>();
  if (auto body = decode_known(type, payload))
    message.body = std::move(*body);
  else
    message.body = Unknown{type, payload};
  return message;
}

json summary_to_json(const Summary& s) {
  json players = json::array();
  for (const PlayerSummary& p : s.players)
    players.push_back({{"player_index", p.player_index}, {"display_name", p.display_name},
                       {"tasks", p.tasks}, {"correct", p.correct}, {"passed", p.passed}});
  return {{"players", players},
          {"total_tasks", s.total_tasks},
          {"total_correct", s.total_correct},
          {"total_passed", s.total_passed},
          {"rewards_shown", s.rewards_shown},
          {"mean_recognition_latency_ms", s.mean_recognition_latency_ms},
          {"total_duration_ms", s.total_duration_ms}};
}

Summary summary_from_json(const json& j) {
  if (!j.is_object()) throw MalformedFrame("summary must be an object");
  Summary s;
  const json players = field<json>(j, "players");
  if (!players.is_array()) throw MalformedFrame("summary players must be a list");
  for (const json& p : players)
    s.players.push_back({field<int>(p, "player_index"), field<std::string>(p, "display_name"),
                         field<int>(p, "tasks"), field<int>(p, "correct"), field<int>(p, "passed")});
  s.total_tasks = field<int>(j, "total_tasks");
  s.total_correct = field<int>(j, "total_correct");
  s.total_passed = field<int>(j, "total_passed");
  s.rewards_shown = field<int>(j, "rewards_shown");
  s.mean_recognition_latency_ms = field<double>(j, "mean_recognition_latency_ms");
  s.total_duration_ms = field<std::int64_t>(j, "total_duration_ms");
  return s;
}

std::optional<Message> effect_to_message(const Effect& effect, const SessionState& state) {
  return std::visit(
      overloaded{
          [](const effect::ShowPrompt& e) -> std::optional<Message> {
            return Message{PromptShown{e.task_index, e.task.object_id, e.task.image_ref,
                                       e.task.sound_ref, e.task.display_prompt,
                                       to_string(e.task.mode.kind), e.task.mode.attribute,
                                       e.active_player}};
          },
          [](const effect::ReportRecognition& e) -> std::optional<Message> {
            return Message{RecognitionResult{e.match.matched, e.match.matched_label, e.transcript,
                                             e.latency_ms}};
          },
          [](const effect::ShowReward& e) -> std::optional<Message> {
            return Message{Reward{e.icon, e.duration_ms}};
          },
          [](const effect::ShowTryAgain& e) -> std::optional<Message> {
            return Message{TryAgain{e.attempts_left}};
          },
          [](const effect::ShowPassed&) -> std::optional<Message> { return Message{PromptPassed{}}; },
          [&](const effect::AdvanceTurn& e) -> std::optional<Message> {
            const auto index = static_cast<std::size_t>(e.new_active);
            const std::string name =
                index < state.players.size() ? state.players[index].display_name : default_player_name(e.new_active);
            return Message{TurnChanged{e.new_active, name}};
          },
          [](const effect::EndSession& e) -> std::optional<Message> {
            return Message{SessionComplete{e.summary}};
          },
          [](const effect::StartTimer&) -> std::optional<Message> { return std::nullopt; },
          [](const effect::RecordOutcome&) -> std::optional<Message> { return std::nullopt; },
      },
      effect);
}

}  // namespace covol::wire
