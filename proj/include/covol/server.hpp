#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

#include "covol/session_host.hpp"

namespace covol::server {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks an ephemeral port
  std::filesystem::path asset_dir;
  int threads = 1;
  int decode_threads = 2;
  std::chrono::milliseconds tick{10};
};

/// HTTP + WebSocket front end.
///
///   /ws        WebSocket; text frames are JSON messages, binary frames are
///              audio chunks (4-byte big-endian seq + PCM)
///   /healthz   200 "ok"
///   /catalogs  JSON list of catalog languages
///   /assets/*  files below the asset directory
class Server {
 public:
  Server(ServerOptions options, RegistryOptions registry);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts serving on background threads.
  void start();
  /// Binds and serves on the calling thread until SIGINT/SIGTERM.
  void run();
  void stop();

  unsigned short port() const;
  Gateway& gateway();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace covol::server
