// Python bindings. Structured values cross the boundary as plain dicts and
// lists, converted through JSON.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "covol/catalog.hpp"
#include "covol/config.hpp"
#include "covol/metrics.hpp"
#include "covol/session.hpp"
#include "covol/tact_matcher.hpp"
#include "covol/wire.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

py::object to_py(const json& value) { return py::module_::import("json").attr("loads")(value.dump()); }

json from_py(const py::handle& value) {
  return json::parse(py::module_::import("json").attr("dumps")(value).cast<std::string>());
}

py::dict task_to_py(const covol::PromptTask& t) {
  py::dict d;
  d["object_id"] = t.object_id;
  d["mode"] = covol::to_string(t.mode.kind);
  d["attribute"] = t.mode.attribute;
  d["expected"] = t.expected;
  d["display_prompt"] = t.display_prompt;
  d["image_ref"] = t.image_ref;
  d["sound_ref"] = t.sound_ref ? py::object(py::str(*t.sound_ref)) : py::object(py::none());
  return d;
}

covol::PromptTask task_from_py(const py::dict& d) {
  covol::PromptTask t;
  t.object_id = d["object_id"].cast<std::string>();
  t.mode.kind = covol::prompt_mode_from_string(d["mode"].cast<std::string>());
  if (d.contains("attribute")) t.mode.attribute = d["attribute"].cast<std::string>();
  t.expected = d["expected"].cast<std::vector<std::string>>();
  if (d.contains("display_prompt")) t.display_prompt = d["display_prompt"].cast<std::string>();
  if (d.contains("image_ref")) t.image_ref = d["image_ref"].cast<std::string>();
  if (d.contains("sound_ref") && !d["sound_ref"].is_none()) t.sound_ref = d["sound_ref"].cast<std::string>();
  return t;
}

covol::Catalog catalog_from(const py::object& source) {
  if (py::isinstance<py::dict>(source)) return covol::parse_catalog(from_py(source).dump());
  return covol::load_catalog(source.cast<std::filesystem::path>());
}

py::list violations_to_py(const std::vector<covol::Violation>& list) {
  py::list out;
  for (const auto& v : list) {
    py::dict d;
    d["object_id"] = v.object_id;
    d["field"] = v.field;
    d["rule"] = v.rule;
    out.append(d);
  }
  return out;
}

py::dict outcome_to_py(const covol::PromptOutcome& o) {
  py::dict d;
  d["task_index"] = o.task_index;
  d["player_index"] = o.player_index;
  d["result"] = covol::to_string(o.result);
  d["attempts_used"] = o.attempts_used;
  d["final_transcript"] = o.final_transcript;
  d["matched_label"] = o.matched_label ? py::object(py::str(*o.matched_label)) : py::object(py::none());
  d["recognition_latency_ms"] = o.recognition_latency_ms;
  return d;
}

py::dict message_dict(const std::string& type, py::dict payload) {
  py::dict d;
  d["type"] = type;
  d["payload"] = payload;
  return d;
}

// Client-visible effects use the wire shape; internal ones get their own tag.
py::list effects_to_py(const std::vector<covol::Effect>& effects, const covol::SessionState& state) {
  py::list out;
  for (const auto& effect : effects) {
    if (const auto* timer = std::get_if<covol::effect::StartTimer>(&effect)) {
      py::dict p;
      p["kind"] = covol::to_string(timer->timer.kind);
      p["serial"] = timer->timer.serial;
      p["duration_ms"] = timer->duration_ms;
      out.append(message_dict("start_timer", p));
    } else if (const auto* record = std::get_if<covol::effect::RecordOutcome>(&effect)) {
      out.append(message_dict("record_outcome", outcome_to_py(record->outcome)));
    } else if (auto message = covol::wire::effect_to_message(effect, state)) {
      py::dict d = to_py(json::parse(covol::wire::encode(*message).data));
      d.attr("pop")("protocol_version");
      out.append(d);
    }
  }
  return out;
}

// Thin stateful wrapper over the pure transition function.
class PySession {
 public:
  PySession(const py::dict& config, const py::list& tasks, const std::string& session_id) {
    const covol::SessionConfig c = covol::apply_overrides({}, from_py(config));
    std::vector<covol::PromptTask> list;
    for (const auto& t : tasks) list.push_back(task_from_py(t.cast<py::dict>()));
    state_ = covol::create_session(c, std::move(list), session_id);
  }

  py::list join(int index, const std::string& name, const std::string& avatar, std::int64_t now) {
    return apply(covol::event::PlayerJoined{{index, name, avatar, true}}, now);
  }
  py::list leave(int index, std::int64_t now) { return apply(covol::event::PlayerLeft{index}, now); }
  py::list all_ready(std::int64_t now) { return apply(covol::event::AllReady{}, now); }
  py::list transcript(const std::string& text, std::int64_t now, std::optional<std::int64_t> utterance_end) {
    return apply(covol::event::TranscriptFinal{{text, utterance_end.value_or(now), now}}, now);
  }
  py::list attempt_timeout(std::int64_t now) { return apply(covol::event::AttemptTimeout{}, now); }
  py::list fire_timer(std::int64_t now) {
    if (!state_.armed_timer) throw covol::Error(covol::ErrorCode::invalid_transition, "no timer is armed");
    return apply(covol::event::TimerElapsed{*state_.armed_timer}, now);
  }

  std::string phase() const { return covol::to_string(state_.phase); }
  std::size_t cursor() const { return state_.cursor; }
  int active_player() const { return state_.active_player; }
  int attempts_on_current() const { return state_.attempts_on_current; }
  py::object armed_timer() const {
    if (!state_.armed_timer) return py::none();
    return py::make_tuple(covol::to_string(state_.armed_timer->kind), state_.armed_timer->serial);
  }
  py::object current_task() const {
    if (state_.cursor >= state_.tasks.size()) return py::none();
    return task_to_py(state_.current_task());
  }
  py::list outcomes() const {
    py::list out;
    for (const auto& o : state_.metrics) out.append(outcome_to_py(o));
    return out;
  }
  py::object summary() const { return to_py(covol::wire::summary_to_json(covol::session_summary(state_))); }

 private:
  py::list apply(const covol::SessionEvent& event, std::int64_t now) {
    covol::Transition t = covol::handle_event(state_, event, now);
    state_ = std::move(t.state);
    return effects_to_py(t.effects, state_);
  }

  covol::SessionState state_;
};

py::object decode_frame(const py::object& frame) {
  const bool binary = py::isinstance<py::bytes>(frame);
  const covol::wire::Message m = covol::wire::decode({binary, frame.cast<std::string>()});
  if (const auto* audio = std::get_if<covol::wire::AudioChunkMsg>(&m.body)) {
    py::dict payload;
    payload["seq"] = audio->seq;
    payload["pcm"] = py::bytes(reinterpret_cast<const char*>(audio->pcm.data()), audio->pcm.size());
    py::dict d = message_dict("audio_chunk", payload);
    d["protocol_version"] = m.protocol_version;
    return std::move(d);
  }
  return to_py(json::parse(covol::wire::encode(m).data));
}

py::object encode_frame(const py::dict& message) {
  const std::string type = message["type"].cast<std::string>();
  if (type == covol::wire::AudioChunkMsg::kType) {
    const py::dict payload = message["payload"].cast<py::dict>();
    const std::string pcm = payload["pcm"].cast<std::string>();
    covol::wire::AudioChunkMsg audio{payload["seq"].cast<std::uint32_t>(), {pcm.begin(), pcm.end()}};
    return py::bytes(covol::wire::encode({audio}).data);
  }
  json doc = from_py(message);
  if (!doc.contains("protocol_version")) doc["protocol_version"] = covol::wire::kProtocolVersion;
  // Decoding first validates the message and canonicalizes its fields.
  return py::str(covol::wire::encode(covol::wire::decode({false, doc.dump()})).data);
}

}  // namespace

PYBIND11_MODULE(_covol, m) {
  m.doc() = "Tacting game core: answer matching, catalogs, sessions, wire codec, ASR benchmark.";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&] { return py::object(py::exception<covol::Error>(m, "CovolError")); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const covol::Error& e) {
      const py::object& type = error_type.get_stored();
      py::object instance = type(e.what());
      instance.attr("code") = covol::to_string(e.code());
      PyErr_SetObject(type.ptr(), instance.ptr());
    }
  });

  m.attr("PROTOCOL_VERSION") = covol::wire::kProtocolVersion;
  m.attr("MIN_PICTOGRAM_INTERVAL_MS") = covol::kMinPictogramIntervalMs;

  m.def("normalize", [](const std::string& text) { return covol::normalize(text); }, py::arg("text"));
  m.def(
      "match",
      [](const std::string& transcript, const std::vector<std::string>& accepted) {
        const covol::MatchResult r = covol::match(transcript, accepted);
        py::dict d;
        d["matched"] = r.matched;
        d["label"] = r.matched_label ? py::object(py::str(*r.matched_label)) : py::object(py::none());
        d["token_index"] = r.token_index ? py::object(py::int_(*r.token_index)) : py::object(py::none());
        return d;
      },
      py::arg("transcript"), py::arg("accepted"));

  m.def(
      "word_error_rate",
      [](const std::string& reference, const std::string& hypothesis) {
        const covol::WordErrorRate w = covol::word_error_rate(reference, hypothesis);
        return py::make_tuple(w.edits, w.reference_words);
      },
      py::arg("reference"), py::arg("hypothesis"), "Returns (edits, reference_words).");
  m.def(
      "word_edit_distance",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b) { return covol::word_edit_distance(a, b); },
      py::arg("reference"), py::arg("hypothesis"));

  m.def("load_catalog", [](const py::object& source) { return to_py(covol::to_json(catalog_from(source))); },
        py::arg("source"), "Loads a catalog from a path (or validates a dict) and returns it as a dict.");
  m.def(
      "validate_catalog",
      [](const py::dict& catalog) {
        covol::CatalogCheck check;
        try {
          check = covol::validate_catalog(covol::parse_catalog(from_py(catalog).dump()));
        } catch (const covol::SchemaViolation& e) {
          // The parser validates too and refuses broken documents.
          check.violations = e.violations();
        }
        py::dict d;
        d["violations"] = violations_to_py(check.violations);
        d["warnings"] = violations_to_py(check.warnings);
        return d;
      },
      py::arg("catalog"));
  m.def(
      "build_prompt_sequence",
      [](const py::object& catalog, const py::dict& config, std::uint64_t seed) {
        const covol::SessionConfig c = covol::apply_overrides({}, from_py(config));
        py::list out;
        for (const auto& t : covol::build_prompt_sequence(catalog_from(catalog), c, seed)) out.append(task_to_py(t));
        return out;
      },
      py::arg("catalog"), py::arg("config") = py::dict(), py::arg("seed") = 0);
  m.def(
      "session_config",
      [](const py::dict& overrides) { return to_py(covol::to_json(covol::apply_overrides({}, from_py(overrides)))); },
      py::arg("overrides") = py::dict(), "Validated config with defaults filled in.");

  py::class_<PySession>(m, "Session")
      .def(py::init<const py::dict&, const py::list&, const std::string&>(), py::arg("config"), py::arg("tasks"),
           py::arg("session_id") = "")
      .def("join", &PySession::join, py::arg("index"), py::arg("name") = "", py::arg("avatar") = "",
           py::arg("now_ms") = 0)
      .def("leave", &PySession::leave, py::arg("index"), py::arg("now_ms") = 0)
      .def("all_ready", &PySession::all_ready, py::arg("now_ms") = 0)
      .def("transcript", &PySession::transcript, py::arg("text"), py::arg("now_ms"),
           py::arg("utterance_end_ms") = py::none())
      .def("attempt_timeout", &PySession::attempt_timeout, py::arg("now_ms"))
      .def("fire_timer", &PySession::fire_timer, py::arg("now_ms"))
      .def_property_readonly("phase", &PySession::phase)
      .def_property_readonly("cursor", &PySession::cursor)
      .def_property_readonly("active_player", &PySession::active_player)
      .def_property_readonly("attempts_on_current", &PySession::attempts_on_current)
      .def_property_readonly("armed_timer", &PySession::armed_timer)
      .def_property_readonly("current_task", &PySession::current_task)
      .def_property_readonly("outcomes", &PySession::outcomes)
      .def("summary", &PySession::summary);

  m.def("decode_frame", &decode_frame, py::arg("frame"), "str for JSON frames, bytes for binary audio frames.");
  m.def("encode_frame", &encode_frame, py::arg("message"));

  m.def(
      "run_benchmark",
      [](const std::filesystem::path& manifest) {
        return to_py(json::parse(covol::render_report(covol::run_benchmark(covol::load_manifest(manifest)),
                                                      covol::ReportFormat::json)));
      },
      py::arg("manifest"), "Runs a scripted benchmark manifest; returns {'aggregate': ..., 'rows': [...]}.");
}
