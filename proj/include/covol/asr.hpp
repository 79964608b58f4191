#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "covol/clock.hpp"

namespace covol {

// Capture format for every recognizer: 16 kHz, 16-bit signed LE, mono PCM.
inline constexpr int kSampleRateHz = 16000;
inline constexpr int kBytesPerSample = 2;

struct AudioChunk {
  std::vector<std::uint8_t> samples;
  std::int64_t capture_timestamp_ms = 0;

  bool operator==(const AudioChunk&) const = default;
};

/// Throws Error(audio_unreadable) unless the byte length is even and
/// non-zero.
void validate_chunk(const AudioChunk& chunk);

/// Final recognition of one utterance. Latency is the user-perceived gap
/// between the end of speech and the result being available.
struct FinalTranscript {
  std::string text;
  std::int64_t utterance_end_ms = 0;
  std::int64_t decoded_at_ms = 0;

  std::int64_t latency_ms() const { return decoded_at_ms - utterance_end_ms; }

  bool operator==(const FinalTranscript&) const = default;
};

enum class RecognizerKind { scripted, engine };

const char* to_string(RecognizerKind kind) noexcept;

struct RecognizerDescriptor {
  RecognizerKind kind = RecognizerKind::scripted;
  std::string model_identifier;  // ignored for scripted recognizers
  std::string language = "en";

  bool operator==(const RecognizerDescriptor&) const = default;
};

/// One in-flight utterance. Accepts audio until finalized; finalizing twice
/// or pushing after finalize throws Error(handle_finalized).
class Utterance {
 public:
  virtual ~Utterance() = default;
  Utterance(const Utterance&) = delete;
  Utterance& operator=(const Utterance&) = delete;

  std::optional<std::string> push_audio(const AudioChunk& chunk);
  FinalTranscript finalize();
  bool finalized() const noexcept { return finalized_; }

 protected:
  explicit Utterance(Clock& clock) : clock_(clock) {}

  virtual std::optional<std::string> on_audio(const AudioChunk& chunk) = 0;
  // Blocks until the final hypothesis is available.
  virtual std::string on_finalize() = 0;

  Clock& clock() const noexcept { return clock_; }

 private:
  Clock& clock_;
  bool finalized_ = false;
};

class Recognizer {
 public:
  virtual ~Recognizer() = default;

  virtual RecognizerDescriptor descriptor() const = 0;
  virtual bool supports_language(const std::string& language) const = 0;

  /// Throws Error(unsupported_language).
  std::unique_ptr<Utterance> begin_utterance(const std::string& language);

 protected:
  virtual std::unique_ptr<Utterance> open_utterance(const std::string& language) = 0;
};

// ---------------------------------------------------------------------------
// Scripted recognizer: deterministic stand-in for an engine.

struct UtteranceScript {
  std::string text;
  std::int64_t delay_ms = 0;
  // Number of chunks received -> partial hypothesis emitted on that chunk.
  std::map<std::size_t, std::string> partials;

  bool operator==(const UtteranceScript&) const = default;
};

/// Hands out queued scripts in order, one per begun utterance, and falls back
/// to a default script (empty text) when the queue runs dry. finalize()
/// sleeps the script's delay on the supplied clock.
class ScriptedRecognizer final : public Recognizer {
 public:
  explicit ScriptedRecognizer(Clock& clock, std::set<std::string> languages = {"en"});

  void enqueue(UtteranceScript script);
  void set_default(UtteranceScript script);
  std::size_t pending_scripts() const;

  RecognizerDescriptor descriptor() const override;
  bool supports_language(const std::string& language) const override;

 protected:
  std::unique_ptr<Utterance> open_utterance(const std::string& language) override;

 private:
  Clock& clock_;
  std::set<std::string> languages_;
  mutable std::mutex mutex_;
  std::deque<UtteranceScript> queue_;
  UtteranceScript default_;
};

// ---------------------------------------------------------------------------
// Engine plug-in contract: configure(model, sample rate), then per utterance
// accept PCM chunks (optionally yielding partials) and produce a final string.

class EngineStream {
 public:
  virtual ~EngineStream() = default;
  virtual std::optional<std::string> accept(const std::vector<std::uint8_t>& pcm) = 0;
  virtual std::string finish() = 0;
};

class SpeechEngine {
 public:
  virtual ~SpeechEngine() = default;
  virtual std::string model_identifier() const = 0;
  virtual std::unique_ptr<EngineStream> open_stream(int sample_rate_hz) = 0;
};

class EngineRecognizer final : public Recognizer {
 public:
  EngineRecognizer(std::shared_ptr<SpeechEngine> engine, Clock& clock, std::string language);

  RecognizerDescriptor descriptor() const override;
  bool supports_language(const std::string& language) const override;

 protected:
  std::unique_ptr<Utterance> open_utterance(const std::string& language) override;

 private:
  std::shared_ptr<SpeechEngine> engine_;
  Clock& clock_;
  std::string language_;
};

/// Binds the Vosk C API from libvosk at runtime (dlopen) and loads a model
/// directory. Throws Error(recognizer_unavailable) when either is missing.
std::shared_ptr<SpeechEngine> load_vosk_engine(const std::filesystem::path& model_dir);

/// Explicit path, else $COVOL_MODEL_PATH, else nullopt (scripted mode).
std::optional<std::filesystem::path> resolve_model_path(
    const std::optional<std::filesystem::path>& explicit_path);

/// Reads a RIFF/WAVE file that must already be in the capture format and
/// returns its PCM payload. Throws Error(audio_unreadable).
std::vector<std::uint8_t> read_wav_pcm(const std::filesystem::path& path);

}  // namespace covol
