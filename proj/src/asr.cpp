#include "covol/asr.hpp"

#include <dlfcn.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "covol/error.hpp"

namespace covol {
namespace fs = std::filesystem;

const char* to_string(RecognizerKind kind) noexcept {
  return kind == RecognizerKind::scripted ? "scripted" : "engine";
}

void validate_chunk(const AudioChunk& chunk) {
  if (chunk.samples.empty() || chunk.samples.size() % kBytesPerSample != 0)
    throw Error(ErrorCode::audio_unreadable,
                "audio chunk must hold a non-zero, even number of bytes");
}

std::optional<std::string> Utterance::push_audio(const AudioChunk& chunk) {
  if (finalized_) throw Error(ErrorCode::handle_finalized, "utterance already finalized");
  validate_chunk(chunk);
  return on_audio(chunk);
}

FinalTranscript Utterance::finalize() {
  if (finalized_) throw Error(ErrorCode::handle_finalized, "utterance already finalized");
  finalized_ = true;
  FinalTranscript result;
  result.utterance_end_ms = clock_.now_ms();
  result.text = on_finalize();
  result.decoded_at_ms = clock_.now_ms();
  return result;
}

std::unique_ptr<Utterance> Recognizer::begin_utterance(const std::string& language) {
  if (!supports_language(language))
    throw Error(ErrorCode::unsupported_language, "recognizer does not support '" + language + "'");
  return open_utterance(language);
}

// ---------------------------------------------------------------------------

namespace {

class ScriptedUtterance final : public Utterance {
 public:
  ScriptedUtterance(Clock& clock, UtteranceScript script)
      : Utterance(clock), script_(std::move(script)) {}

 protected:
  std::optional<std::string> on_audio(const AudioChunk&) override {
    ++chunks_;
    if (auto it = script_.partials.find(chunks_); it != script_.partials.end()) return it->second;
    return std::nullopt;
  }

  std::string on_finalize() override {
    clock().sleep_for_ms(script_.delay_ms);
    return script_.text;
  }

 private:
  UtteranceScript script_;
  std::size_t chunks_ = 0;
};

}  // namespace

ScriptedRecognizer::ScriptedRecognizer(Clock& clock, std::set<std::string> languages)
    : clock_(clock), languages_(std::move(languages)) {}

void ScriptedRecognizer::enqueue(UtteranceScript script) {
  std::lock_guard lock(mutex_);
  queue_.push_back(std::move(script));
}

void ScriptedRecognizer::set_default(UtteranceScript script) {
  std::lock_guard lock(mutex_);
  default_ = std::move(script);
}

std::size_t ScriptedRecognizer::pending_scripts() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

RecognizerDescriptor ScriptedRecognizer::descriptor() const {
  return {RecognizerKind::scripted, "scripted",
          languages_.empty() ? std::string() : *languages_.begin()};
}

bool ScriptedRecognizer::supports_language(const std::string& language) const {
  return languages_.contains(language);
}

std::unique_ptr<Utterance> ScriptedRecognizer::open_utterance(const std::string&) {
  std::lock_guard lock(mutex_);
  UtteranceScript script = default_;
  if (!queue_.empty()) {
    script = std::move(queue_.front());
    queue_.pop_front();
  }
  return std::make_unique<ScriptedUtterance>(clock_, std::move(script));
}

// ---------------------------------------------------------------------------

namespace {

class EngineUtterance final : public Utterance {
 public:
  EngineUtterance(Clock& clock, std::unique_ptr<EngineStream> stream)
      : Utterance(clock), stream_(std::move(stream)) {}

 protected:
  std::optional<std::string> on_audio(const AudioChunk& chunk) override {
    return stream_->accept(chunk.samples);
  }
  std::string on_finalize() override { return stream_->finish(); }

 private:
  std::unique_ptr<EngineStream> stream_;
};

}  // namespace

EngineRecognizer::EngineRecognizer(std::shared_ptr<SpeechEngine> engine, Clock& clock,
                                   std::string language)
    : engine_(std::move(engine)), clock_(clock), language_(std::move(language)) {
  if (!engine_) throw Error(ErrorCode::recognizer_unavailable, "no speech engine");
}

RecognizerDescriptor EngineRecognizer::descriptor() const {
  return {RecognizerKind::engine, engine_->model_identifier(), language_};
}

bool EngineRecognizer::supports_language(const std::string& language) const {
  return language == language_;
}

std::unique_ptr<Utterance> EngineRecognizer::open_utterance(const std::string&) {
  return std::make_unique<EngineUtterance>(clock_, engine_->open_stream(kSampleRateHz));
}

// ---------------------------------------------------------------------------
// Vosk binding

namespace {

struct VoskApi {
  void* library = nullptr;
  void* (*model_new)(const char*) = nullptr;
  void (*model_free)(void*) = nullptr;
  void* (*recognizer_new)(void*, float) = nullptr;
  void (*recognizer_free)(void*) = nullptr;
  int (*accept_waveform)(void*, const char*, int) = nullptr;
  const char* (*result)(void*) = nullptr;
  const char* (*partial_result)(void*) = nullptr;
  const char* (*final_result)(void*) = nullptr;

  static const VoskApi& get() {
    static const VoskApi api = load();
    return api;
  }

  static VoskApi load() {
    VoskApi api;
    for (const char* name : {"libvosk.so", "libvosk.dylib"}) {
      api.library = dlopen(name, RTLD_NOW | RTLD_LOCAL);
      if (api.library) break;
    }
    if (!api.library) return api;
    auto bind = [&](auto& fn, const char* symbol) {
      fn = reinterpret_cast<std::remove_reference_t<decltype(fn)>>(dlsym(api.library, symbol));
    };
    bind(api.model_new, "vosk_model_new");
    bind(api.model_free, "vosk_model_free");
    bind(api.recognizer_new, "vosk_recognizer_new");
    bind(api.recognizer_free, "vosk_recognizer_free");
    bind(api.accept_waveform, "vosk_recognizer_accept_waveform");
    bind(api.result, "vosk_recognizer_result");
    bind(api.partial_result, "vosk_recognizer_partial_result");
    bind(api.final_result, "vosk_recognizer_final_result");
    return api;
  }

  bool complete() const {
    return library && model_new && model_free && recognizer_new && recognizer_free &&
           accept_waveform && result && partial_result && final_result;
  }
};

std::string json_field(const char* raw, const char* key) {
  if (!raw) return {};
  const auto doc = nlohmann::json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.contains(key) || !doc[key].is_string()) return {};
  return doc[key].get<std::string>();
}

class VoskStream final : public EngineStream {
 public:
  VoskStream(const VoskApi& api, void* model, int sample_rate_hz)
      : api_(api), recognizer_(api.recognizer_new(model, static_cast<float>(sample_rate_hz))) {
    if (!recognizer_) throw Error(ErrorCode::recognizer_unavailable, "vosk_recognizer_new failed");
  }
  ~VoskStream() override { api_.recognizer_free(recognizer_); }

  std::optional<std::string> accept(const std::vector<std::uint8_t>& pcm) override {
    const int state = api_.accept_waveform(
        recognizer_, reinterpret_cast<const char*>(pcm.data()), static_cast<int>(pcm.size()));
    if (state < 0) throw Error(ErrorCode::audio_unreadable, "vosk rejected audio");
    if (state == 1) {
      // Vosk closed a segment on its own; keep it, the utterance continues
      // until the server finalizes.
      append(json_field(api_.result(recognizer_), "text"));
      return std::nullopt;
    }
    std::string partial = json_field(api_.partial_result(recognizer_), "partial");
    if (partial.empty()) return std::nullopt;
    return joined_.empty() ? partial : joined_ + " " + partial;
  }

  std::string finish() override {
    append(json_field(api_.final_result(recognizer_), "text"));
    return joined_;
  }

 private:
  void append(const std::string& text) {
    if (text.empty()) return;
    if (!joined_.empty()) joined_ += ' ';
    joined_ += text;
  }

  const VoskApi& api_;
  void* recognizer_;
  std::string joined_;
};

class VoskEngine final : public SpeechEngine {
 public:
  VoskEngine(const VoskApi& api, const fs::path& model_dir)
      : api_(api), model_(api.model_new(model_dir.c_str())), identifier_(model_dir.filename().string()) {
    if (!model_)
      throw Error(ErrorCode::recognizer_unavailable, "cannot load model at " + model_dir.string());
  }
  ~VoskEngine() override { api_.model_free(model_); }

  std::string model_identifier() const override { return identifier_; }
  std::unique_ptr<EngineStream> open_stream(int sample_rate_hz) override {
    return std::make_unique<VoskStream>(api_, model_, sample_rate_hz);
  }

 private:
  const VoskApi& api_;
  void* model_;
  std::string identifier_;
};

}  // namespace

std::shared_ptr<SpeechEngine> load_vosk_engine(const fs::path& model_dir) {
  std::error_code ec;
  if (!fs::is_directory(model_dir, ec))
    throw Error(ErrorCode::recognizer_unavailable, "model directory not found: " + model_dir.string());
  const VoskApi& api = VoskApi::get();
  if (!api.complete())
    throw Error(ErrorCode::recognizer_unavailable, "libvosk is not installed or incomplete");
  return std::make_shared<VoskEngine>(api, model_dir);
}

std::optional<fs::path> resolve_model_path(const std::optional<fs::path>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return explicit_path;
  if (const char* env = std::getenv("COVOL_MODEL_PATH"); env && *env) return fs::path(env);
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

}  // namespace

std::vector<std::uint8_t> read_wav_pcm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::audio_unreadable, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  auto fail = [&](const std::string& why) -> std::vector<std::uint8_t> {
    throw Error(ErrorCode::audio_unreadable, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    return fail("not a RIFF/WAVE file");

  bool have_format = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::size_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) return fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) return fail("short fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      if (le16(f) != 1) return fail("not integer PCM");
      if (le16(f + 2) != 1) return fail("expected mono");
      if (le32(f + 4) != static_cast<std::uint32_t>(kSampleRateHz)) return fail("expected 16 kHz");
      if (le16(f + 14) != 16) return fail("expected 16-bit samples");
      have_format = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_format) return fail("data before fmt");
      if (size == 0 || size % kBytesPerSample != 0) return fail("empty or odd-sized data");
      return {bytes.begin() + static_cast<std::ptrdiff_t>(body),
              bytes.begin() + static_cast<std::ptrdiff_t>(body + size)};
    }
    pos = body + size + (size & 1);
  }
  return fail("no data chunk");
}

}  // namespace covol
