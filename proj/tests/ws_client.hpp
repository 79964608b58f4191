// Blocking WebSocket test client. A reader thread decodes every incoming
// frame into a queue the test can wait on.
#pragma once

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "covol/wire.hpp"

namespace covol::testing {

class WsClient {
 public:
  explicit WsClient(unsigned short port) : ws_(io_) {
    namespace asio = boost::asio;
    asio::ip::tcp::resolver resolver(io_);
    asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/ws");
    reader_ = std::thread([this] { read_loop(); });
  }

  ~WsClient() { close(); }

  void send(const wire::Message& message) {
    const wire::Frame frame = wire::encode(message);
    send_raw(frame);
  }

  void send_raw(const wire::Frame& frame) {
    std::lock_guard lock(write_mutex_);
    ws_.binary(frame.binary);
    ws_.write(boost::asio::buffer(frame.data));
  }

  // Next message, or nullopt after `timeout` or once the peer has closed.
  std::optional<wire::Message> next(std::chrono::milliseconds timeout = std::chrono::milliseconds(2000)) {
    std::unique_lock lock(mutex_);
    ready_.wait_for(lock, timeout, [&] { return !queue_.empty() || eof_; });
    if (queue_.empty()) return std::nullopt;
    wire::Message m = std::move(queue_.front());
    queue_.pop_front();
    return m;
  }

  // Skips until a message of type T arrives.
  template <class T>
  std::optional<T> expect(std::chrono::milliseconds timeout = std::chrono::milliseconds(2000)) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      auto m = next(left);
      if (!m) return std::nullopt;
      if (auto* body = std::get_if<T>(&m->body)) return *body;
    }
  }

  std::vector<wire::Message> received() const {
    std::lock_guard lock(mutex_);
    return all_;
  }

  bool closed_by_peer() const {
    std::lock_guard lock(mutex_);
    return eof_;
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    // No close handshake: it would read alongside the reader thread. The
    // server sees a dropped connection, which is what the tests want anyway.
    boost::beast::error_code ec;
    ws_.next_layer().shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
    if (reader_.joinable()) reader_.join();
    ws_.next_layer().close(ec);
  }

 private:
  void read_loop() {
    for (;;) {
      boost::beast::flat_buffer buffer;
      boost::beast::error_code ec;
      ws_.read(buffer, ec);
      if (ec) {
        std::lock_guard lock(mutex_);
        eof_ = true;
        ready_.notify_all();
        return;
      }
      wire::Frame frame{!ws_.got_text(), boost::beast::buffers_to_string(buffer.data())};
      std::lock_guard lock(mutex_);
      wire::Message m = wire::decode(frame);
      all_.push_back(m);
      queue_.push_back(std::move(m));
      ready_.notify_all();
    }
  }

  boost::asio::io_context io_;
  boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
  std::thread reader_;
  std::mutex write_mutex_;
  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<wire::Message> queue_;
  std::vector<wire::Message> all_;
  bool eof_ = false;
  bool closed_ = false;
};

// One plain HTTP GET; returns status and body.
inline std::pair<int, std::string> http_get(unsigned short port, const std::string& target) {
  namespace asio = boost::asio;
  namespace http = boost::beast::http;
  asio::io_context io;
  asio::ip::tcp::socket socket(io);
  asio::ip::tcp::resolver resolver(io);
  asio::connect(socket, resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::empty_body> request(http::verb::get, target, 11);
  request.set(http::field::host, "127.0.0.1");
  request.keep_alive(false);
  http::write(socket, request);
  boost::beast::flat_buffer buffer;
  http::response<http::string_body> response;
  http::read(socket, buffer, response);
  boost::beast::error_code ec;
  socket.shutdown(asio::ip::tcp::socket::shutdown_both, ec);
  return {static_cast<int>(response.result_int()), response.body()};
}

}  // namespace covol::testing
