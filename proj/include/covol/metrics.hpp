#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covol/asr.hpp"
#include "covol/clock.hpp"

namespace covol {

/// Word-level Levenshtein distance (substitutions + insertions + deletions).
std::size_t word_edit_distance(std::span<const std::string> reference,
                               std::span<const std::string> hypothesis);

/// Exact WER as a ratio of edit count over reference length.
struct WordErrorRate {
  std::size_t edits = 0;
  std::size_t reference_words = 1;

  double value() const {
    return static_cast<double>(edits) / static_cast<double>(reference_words);
  }
  // Compares the ratios, so 1/4 == 2/8.
  bool operator==(const WordErrorRate& other) const {
    return edits * other.reference_words == other.edits * reference_words;
  }
};

/// Tokenizes both sides with `normalize`. Throws Error(empty_reference).
WordErrorRate word_error_rate(std::string_view reference, std::string_view hypothesis);

struct BenchEntry {
  std::optional<std::string> script;             // scripted transcript
  std::optional<std::filesystem::path> audio;    // 16 kHz / 16-bit / mono WAV
  std::vector<std::string> references;           // accepted answers, first is canonical
  std::string language = "en";
  std::int64_t delay_ms = 0;                     // scripted decode delay
};

struct BenchManifest {
  std::vector<BenchEntry> entries;
  RecognizerDescriptor recognizer;
};

/// Throws Error(file_not_found), ParseError or Error(schema_violation).
/// Relative audio paths resolve against the manifest's directory.
BenchManifest load_manifest(const std::filesystem::path& path);
BenchManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});

struct BenchRow {
  std::size_t index = 0;
  std::string recognized;
  bool matched = false;
  bool exact = false;  // normalized transcript equals the canonical answer
  WordErrorRate wer;
  std::int64_t latency_ms = 0;
};

struct BenchAggregate {
  double accuracy = 0.0;
  double exact_accuracy = 0.0;
  double mean_wer = 0.0;
  double mean_latency_ms = 0.0;
  std::int64_t max_latency_ms = 0;
  std::string model_identifier;
  std::size_t entry_count = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  BenchAggregate aggregate;
};

struct BenchOptions {
  // Clock used for scripted entries. Simulated by default so scripted delays
  // are measured without actually waiting.
  Clock* scripted_clock = nullptr;
  // Engine for audio entries; without one they fail with
  // Error(recognizer_unavailable).
  std::shared_ptr<SpeechEngine> engine;
  Clock* engine_clock = nullptr;
  std::size_t chunk_bytes = 8192;
};

/// Decodes every entry and scores it. Throws Error(empty_manifest) before
/// any decoding, Error(audio_unreadable) or Error(recognizer_unavailable).
BenchReport run_benchmark(const BenchManifest& manifest, const BenchOptions& options = {});

enum class ReportFormat { csv, json };

std::string render_report(const BenchReport& report, ReportFormat format);
/// Throws Error(io_error).
void export_report(const BenchReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace covol
