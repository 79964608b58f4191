#include "covol/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "covol/catalog.hpp"
#include "covol/error.hpp"
#include "covol/tact_matcher.hpp"

namespace covol {
namespace fs = std::filesystem;
using nlohmann::json;

std::size_t word_edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp) {
  // Single-row Levenshtein over words.
  std::vector<std::size_t> row(hyp.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t above = row[j];
      const std::size_t substitution = diagonal + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      row[j] = std::min({above + 1, row[j - 1] + 1, substitution});
      diagonal = above;
    }
  }
  return row[hyp.size()];
}

WordErrorRate word_error_rate(std::string_view reference, std::string_view hypothesis) {
  const auto ref = normalize(reference);
  if (ref.empty()) throw Error(ErrorCode::empty_reference, "reference has no words");
  const auto hyp = normalize(hypothesis);
  return {word_edit_distance(ref, hyp), ref.size()};
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void bad_manifest(const std::string& where, const std::string& rule) {
  throw SchemaViolation({{where, "", rule, Severity::violation}});
}

}  // namespace

BenchManifest parse_manifest(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte ? byte - 1 : 0), '\n');
    throw ParseError(static_cast<std::size_t>(line), e.what());
  }
  if (!doc.is_object()) bad_manifest("manifest", "top level must be an object");
  for (const auto& [key, value] : doc.items())
    if (key != "recognizer" && key != "entries") bad_manifest("manifest", "unknown field " + key);

  BenchManifest manifest;
  if (auto it = doc.find("recognizer"); it != doc.end()) {
    if (!it->is_object()) bad_manifest("recognizer", "must be an object");
    for (const auto& [key, value] : it->items()) {
      if (key == "kind") {
        const auto kind = value.is_string() ? value.get<std::string>() : "";
        if (kind == "scripted") manifest.recognizer.kind = RecognizerKind::scripted;
        else if (kind == "engine") manifest.recognizer.kind = RecognizerKind::engine;
        else bad_manifest("recognizer", "kind must be scripted or engine");
      } else if ((key == "model" || key == "language") && value.is_string()) {
        (key == "model" ? manifest.recognizer.model_identifier : manifest.recognizer.language) =
            value.get<std::string>();
      } else {
        bad_manifest("recognizer", "unknown or mistyped field " + key);
      }
    }
  }
  if (manifest.recognizer.kind == RecognizerKind::scripted) manifest.recognizer.model_identifier = "scripted";

  const auto entries = doc.find("entries");
  if (entries == doc.end() || !entries->is_array()) bad_manifest("entries", "required list");
  std::size_t index = 0;
  for (const json& node : *entries) {
    const std::string where = "entries[" + std::to_string(index++) + "]";
    if (!node.is_object()) bad_manifest(where, "must be an object");
    BenchEntry entry;
    for (const auto& [key, value] : node.items()) {
      if (key == "script" && value.is_string()) {
        entry.script = value.get<std::string>();
      } else if (key == "audio" && value.is_string()) {
        fs::path audio(value.get<std::string>());
        entry.audio = audio.is_absolute() || base_dir.empty() ? audio : base_dir / audio;
      } else if (key == "reference") {
        if (value.is_string()) entry.references = {value.get<std::string>()};
        else if (value.is_array() && std::all_of(value.begin(), value.end(), [](const json& v) { return v.is_string(); }))
          entry.references = value.get<std::vector<std::string>>();
        else bad_manifest(where, "reference must be a string or list of strings");
      } else if (key == "language" && value.is_string()) {
        entry.language = value.get<std::string>();
      } else if (key == "delay_ms" && value.is_number_integer() && value.get<std::int64_t>() >= 0) {
        entry.delay_ms = value.get<std::int64_t>();
      } else {
        bad_manifest(where, "unknown or mistyped field " + key);
      }
    }
    if (entry.script.has_value() == entry.audio.has_value())
      bad_manifest(where, "exactly one of script or audio is required");
    if (entry.references.empty() ||
        std::any_of(entry.references.begin(), entry.references.end(),
                    [](const std::string& r) { return normalize(r).empty(); }))
      bad_manifest(where, "references must be non-empty");
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

BenchManifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::file_not_found, "cannot open manifest " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path());
}

// ---------------------------------------------------------------------------

BenchReport run_benchmark(const BenchManifest& manifest, const BenchOptions& options) {
  if (manifest.entries.empty()) throw Error(ErrorCode::empty_manifest, "manifest has no entries");

  ManualClock simulated;
  Clock& scripted_clock = options.scripted_clock ? *options.scripted_clock : simulated;
  SteadyClock steady;
  Clock& engine_clock = options.engine_clock ? *options.engine_clock : steady;

  BenchReport report;
  report.aggregate.model_identifier =
      options.engine ? options.engine->model_identifier() : manifest.recognizer.model_identifier;

  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const BenchEntry& entry = manifest.entries[i];
    FinalTranscript transcript;
    if (entry.script) {
      ScriptedRecognizer recognizer(scripted_clock, {entry.language});
      recognizer.enqueue({*entry.script, entry.delay_ms, {}});
      auto utterance = recognizer.begin_utterance(entry.language);
      transcript = utterance->finalize();
    } else {
      std::vector<std::uint8_t> pcm = read_wav_pcm(*entry.audio);
      if (!options.engine)
        throw Error(ErrorCode::recognizer_unavailable,
                    "entry " + std::to_string(i) + " needs a speech engine (set --model-path)");
      EngineRecognizer recognizer(options.engine, engine_clock, entry.language);
      auto utterance = recognizer.begin_utterance(entry.language);
      const std::size_t step = std::max<std::size_t>(kBytesPerSample, options.chunk_bytes & ~std::size_t{1});
      for (std::size_t pos = 0; pos < pcm.size(); pos += step) {
        const auto end = std::min(pcm.size(), pos + step);
        utterance->push_audio({{pcm.begin() + static_cast<std::ptrdiff_t>(pos),
                                pcm.begin() + static_cast<std::ptrdiff_t>(end)},
                               engine_clock.now_ms()});
      }
      transcript = utterance->finalize();
    }

    BenchRow row;
    row.index = i;
    row.recognized = transcript.text;
    row.matched = match(transcript.text, entry.references).matched;
    row.exact = normalize(transcript.text) == normalize(entry.references.front());
    row.wer = word_error_rate(entry.references.front(), transcript.text);
    row.latency_ms = transcript.latency_ms();
    report.rows.push_back(std::move(row));
  }

  BenchAggregate& agg = report.aggregate;
  agg.entry_count = report.rows.size();
  const auto n = static_cast<double>(agg.entry_count);
  std::size_t matched = 0, exact = 0;
  double wer_total = 0.0, latency_total = 0.0;
  for (const BenchRow& row : report.rows) {
    matched += row.matched;
    exact += row.exact;
    wer_total += row.wer.value();
    latency_total += static_cast<double>(row.latency_ms);
    agg.max_latency_ms = std::max(agg.max_latency_ms, row.latency_ms);
  }
  agg.accuracy = static_cast<double>(matched) / n;
  agg.exact_accuracy = static_cast<double>(exact) / n;
  agg.mean_wer = wer_total / n;
  agg.mean_latency_ms = latency_total / n;
  return report;
}

// ---------------------------------------------------------------------------

namespace {

std::string fixed(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6f", value);
  return buffer;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + '"';
}

}  // namespace

std::string render_report(const BenchReport& report, ReportFormat format) {
  if (format == ReportFormat::csv) {
    std::string out = "index,recognized,matched,wer,latency_ms,exact\n";
    for (const BenchRow& row : report.rows) {
      out += std::to_string(row.index) + ',' + csv_field(row.recognized) + ',' +
             (row.matched ? "true" : "false") + ',' + fixed(row.wer.value()) + ',' +
             std::to_string(row.latency_ms) + ',' + (row.exact ? "true" : "false") + '\n';
    }
    return out;
  }

  json rows = json::array();
  for (const BenchRow& row : report.rows)
    rows.push_back({{"index", row.index},
                    {"recognized", row.recognized},
                    {"matched", row.matched},
                    {"exact", row.exact},
                    {"wer", row.wer.value()},
                    {"wer_edits", row.wer.edits},
                    {"wer_reference_words", row.wer.reference_words},
                    {"latency_ms", row.latency_ms}});
  const BenchAggregate& a = report.aggregate;
  json doc = {{"rows", rows},
              {"aggregate",
               {{"accuracy", a.accuracy},
                {"exact_accuracy", a.exact_accuracy},
                {"mean_wer", a.mean_wer},
                {"mean_latency_ms", a.mean_latency_ms},
                {"max_latency_ms", a.max_latency_ms},
                {"model_identifier", a.model_identifier},
                {"entry_count", a.entry_count}}}};
  return doc.dump(2) + '\n';
}

void export_report(const BenchReport& report, ReportFormat format, const fs::path& path) {
  const std::string text = render_report(report, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

}  // namespace covol
