// covol-server: session server for the tacting game.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "covol/asr.hpp"
#include "covol/catalog.hpp"
#include "covol/server.hpp"
#include "covol/wire.hpp"

namespace {

nlohmann::json outcome_json(const covol::PromptOutcome& o) {
  return {{"task_index", o.task_index},
          {"player_index", o.player_index},
          {"result", covol::to_string(o.result)},
          {"attempts_used", o.attempts_used},
          {"final_transcript", o.final_transcript},
          {"matched_label", o.matched_label ? nlohmann::json(*o.matched_label) : nlohmann::json(nullptr)},
          {"recognition_latency_ms", o.recognition_latency_ms}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CoVoL session server"};
  std::string listen = "127.0.0.1:8080";
  std::string catalog_dir = "data/catalogs";
  std::string config_path;
  std::string model_path;
  std::string metrics_out;
  app.add_option("--listen", listen, "address:port to bind")->capture_default_str();
  app.add_option("--catalog-dir", catalog_dir, "directory of catalog JSON files")->capture_default_str();
  app.add_option("--config", config_path, "JSON file of session defaults");
  app.add_option("--model-path", model_path, "speech model directory (default: $COVOL_MODEL_PATH)");
  app.add_option("--metrics-out", metrics_out, "directory for per-session metrics");
  CLI11_PARSE(app, argc, argv);

  try {
    covol::server::ServerOptions options;
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw std::runtime_error("--listen expects address:port");
    options.address = listen.substr(0, colon);
    options.port = static_cast<unsigned short>(std::stoi(listen.substr(colon + 1)));
    options.asset_dir = catalog_dir;

    covol::server::RegistryOptions registry;
    registry.catalogs = covol::load_catalog_dir(catalog_dir);
    for (const auto& [language, catalog] : registry.catalogs) {
      const auto check = covol::validate_catalog(catalog);
      for (const auto& w : check.warnings)
        std::cerr << "warning: " << language << ": " << w.object_id << "." << w.field << ": " << w.rule << "\n";
    }
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open " + config_path);
      registry.defaults = covol::apply_overrides({}, nlohmann::json::parse(in));
    }

    static covol::SteadyClock clock;
    registry.clock = &clock;
    if (auto model = covol::resolve_model_path(model_path.empty() ? std::nullopt
                                                                  : std::optional<std::filesystem::path>(model_path))) {
      auto engine = covol::load_vosk_engine(*model);
      std::cerr << "speech engine: " << engine->model_identifier() << "\n";
      registry.recognizers = [engine](const std::string& language) {
        return std::make_shared<covol::EngineRecognizer>(engine, clock, language);
      };
    } else {
      std::cerr << "speech engine: scripted (no model path)\n";
    }

    if (!metrics_out.empty()) {
      std::filesystem::create_directories(metrics_out);
      registry.on_complete = [dir = std::filesystem::path(metrics_out)](const covol::SessionState& state) {
        nlohmann::json outcomes = nlohmann::json::array();
        for (const auto& o : state.metrics) outcomes.push_back(outcome_json(o));
        const nlohmann::json doc = {{"session_id", state.session_id},
                                    {"config", covol::to_json(state.config)},
                                    {"summary", covol::wire::summary_to_json(covol::session_summary(state))},
                                    {"outcomes", outcomes}};
        std::ofstream out(dir / ("session-" + state.session_id + ".json"));
        out << doc.dump(2) << "\n";
      };
    }

    covol::server::Server server(options, std::move(registry));
    std::cerr << "listening on " << listen << "\n";
    server.run();
  } catch (const std::exception& e) {
    std::cerr << "covol-server: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
