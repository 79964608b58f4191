#include "covol/server.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/thread_pool.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace covol::server {
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
namespace fs = std::filesystem;

namespace {

class WsSession;

class ConnectionTable final : public Transport {
 public:
  void add(ClientId id, const std::shared_ptr<WsSession>& session) {
    std::lock_guard lock(mutex_);
    sessions_[id] = session;
  }
  void remove(ClientId id) {
    std::lock_guard lock(mutex_);
    sessions_.erase(id);
  }
  void send(ClientId client, const wire::Frame& frame) override;
  void close(ClientId client) override;

 private:
  std::shared_ptr<WsSession> lookup(ClientId id) {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second.lock();
  }

  std::mutex mutex_;
  std::map<ClientId, std::weak_ptr<WsSession>> sessions_;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, Gateway& gateway, ConnectionTable& table)
      : ws_(std::move(socket)), gateway_(gateway), table_(table) {}

  void start(http::request<http::string_body> request) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(request, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  void enqueue(wire::Frame frame) {
    asio::post(ws_.get_executor(), [self = shared_from_this(), frame = std::move(frame)]() mutable {
      self->outbox_.push_back(std::move(frame));
      if (self->outbox_.size() == 1) self->write_next();
    });
  }

  void close_after_flush() {
    asio::post(ws_.get_executor(), [self = shared_from_this()] {
      self->closing_ = true;
      if (self->outbox_.empty()) self->do_close();
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    id_ = gateway_.connect();
    table_.add(id_, shared_from_this());
    read_next();
  }

  void read_next() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      finish();
      return;
    }
    wire::Frame frame{!ws_.got_text(), beast::buffers_to_string(buffer_.data())};
    buffer_.consume(buffer_.size());
    gateway_.on_frame(id_, frame);
    read_next();
  }

  void write_next() {
    const wire::Frame& frame = outbox_.front();
    ws_.binary(frame.binary);
    ws_.async_write(asio::buffer(frame.data),
                    beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      outbox_.clear();
      return;
    }
    outbox_.pop_front();
    if (!outbox_.empty()) {
      write_next();
    } else if (closing_) {
      do_close();
    }
  }

  void do_close() {
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  void finish() {
    if (finished_ || id_ == 0) return;
    finished_ = true;
    table_.remove(id_);
    gateway_.on_disconnect(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  Gateway& gateway_;
  ConnectionTable& table_;
  beast::flat_buffer buffer_;
  std::deque<wire::Frame> outbox_;
  ClientId id_ = 0;
  bool closing_ = false;
  bool finished_ = false;
};

void ConnectionTable::send(ClientId client, const wire::Frame& frame) {
  if (auto session = lookup(client)) session->enqueue(frame);
}

void ConnectionTable::close(ClientId client) {
  if (auto session = lookup(client)) session->close_after_flush();
}

std::string mime_type(const fs::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".gif") return "image/gif";
  if (ext == ".wav") return "audio/wav";
  if (ext == ".mp3") return "audio/mpeg";
  if (ext == ".ogg") return "audio/ogg";
  if (ext == ".json") return "application/json";
  return "application/octet-stream";
}

// Maps a URL path under /assets/ to a file inside root, refusing anything
// that climbs out of it.
std::optional<fs::path> asset_path(const fs::path& root, std::string_view target) {
  if (root.empty()) return std::nullopt;
  const fs::path relative = fs::path(std::string(target)).lexically_normal();
  if (relative.empty() || relative.is_absolute()) return std::nullopt;
  for (const auto& part : relative)
    if (part == "..") return std::nullopt;
  return root / relative;
}

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Gateway& gateway, ConnectionTable& table, const fs::path& assets)
      : stream_(std::move(socket)), gateway_(gateway), table_(table), assets_(assets) {}

  void start() {
    asio::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::read, shared_from_this()));
  }

 private:
  void read() {
    request_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, request_,
                     beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (websocket::is_upgrade(request_)) {
      if (request_.target() == "/ws") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), gateway_, table_)->start(std::move(request_));
        return;
      }
      respond(http::status::not_found, "text/plain", "no websocket here\n");
      return;
    }
    route();
  }

  void route() {
    const std::string_view target(request_.target().data(), request_.target().size());
    if (request_.method() != http::verb::get && request_.method() != http::verb::head) {
      respond(http::status::method_not_allowed, "text/plain", "GET only\n");
      return;
    }
    if (target == "/healthz") {
      respond(http::status::ok, "text/plain", "ok");
      return;
    }
    if (target == "/catalogs") {
      respond(http::status::ok, "application/json",
              nlohmann::json(gateway_.registry().languages()).dump());
      return;
    }
    constexpr std::string_view prefix = "/assets/";
    if (target.substr(0, prefix.size()) == prefix) {
      if (auto path = asset_path(assets_, target.substr(prefix.size()))) {
        std::ifstream in(*path, std::ios::binary);
        if (in && fs::is_regular_file(*path)) {
          std::ostringstream body;
          body << in.rdbuf();
          respond(http::status::ok, mime_type(*path), body.str());
          return;
        }
      }
    }
    respond(http::status::not_found, "text/plain", "not found\n");
  }

  void respond(http::status status, const std::string& type, std::string body) {
    auto response = std::make_shared<http::response<http::string_body>>(status, request_.version());
    response->set(http::field::server, "covol");
    response->set(http::field::content_type, type);
    response->keep_alive(request_.keep_alive());
    if (request_.method() == http::verb::head) {
      response->content_length(body.size());
    } else {
      response->body() = std::move(body);
      response->prepare_payload();
    }
    http::async_write(stream_, *response,
                      [self = shared_from_this(), response](beast::error_code ec, std::size_t) {
                        if (ec) return;
                        if (response->keep_alive()) {
                          self->read();
                        } else {
                          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                        }
                      });
  }

  beast::tcp_stream stream_;
  Gateway& gateway_;
  ConnectionTable& table_;
  const fs::path& assets_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
};

}  // namespace

struct Server::Impl {
  ServerOptions options;
  asio::io_context io;
  asio::thread_pool decoders;
  ConnectionTable table;
  std::unique_ptr<Gateway> gateway;
  tcp::acceptor acceptor;
  asio::steady_timer ticker;
  std::vector<std::thread> threads;
  unsigned short bound_port = 0;
  bool stopped = false;

  Impl(ServerOptions opts, RegistryOptions registry)
      : options(std::move(opts)),
        io(std::max(1, options.threads)),
        decoders(static_cast<std::size_t>(std::max(1, options.decode_threads))),
        acceptor(asio::make_strand(io)),
        ticker(io) {
    if (!registry.offload)
      registry.offload = [this](std::function<void()> job) { asio::post(decoders, std::move(job)); };
    gateway = std::make_unique<Gateway>(std::move(registry), table);
  }

  void bind() {
    const tcp::endpoint endpoint(asio::ip::make_address(options.address), options.port);
    acceptor.open(endpoint.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen(asio::socket_base::max_listen_connections);
    bound_port = acceptor.local_endpoint().port();
    accept();
    tick();
  }

  void accept() {
    acceptor.async_accept(asio::make_strand(io), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == asio::error::operation_aborted) return;
      } else {
        std::make_shared<HttpSession>(std::move(socket), *gateway, table, options.asset_dir)->start();
      }
      accept();
    });
  }

  void tick() {
    ticker.expires_after(options.tick);
    ticker.async_wait([this](beast::error_code ec) {
      if (ec) return;
      gateway->tick();
      tick();
    });
  }
};

Server::Server(ServerOptions options, RegistryOptions registry)
    : impl_(std::make_unique<Impl>(std::move(options), std::move(registry))) {}

Server::~Server() { stop(); }

void Server::start() {
  impl_->bind();
  const int count = std::max(1, impl_->options.threads);
  for (int i = 0; i < count; ++i) impl_->threads.emplace_back([this] { impl_->io.run(); });
}

void Server::run() {
  impl_->bind();
  asio::signal_set signals(impl_->io, SIGINT, SIGTERM);
  signals.async_wait([this](beast::error_code, int) { impl_->io.stop(); });
  impl_->io.run();
}

void Server::stop() {
  if (!impl_ || impl_->stopped) return;
  impl_->stopped = true;
  impl_->io.stop();
  for (auto& thread : impl_->threads)
    if (thread.joinable()) thread.join();
  beast::error_code ec;
  impl_->acceptor.close(ec);
  impl_->decoders.join();
}

unsigned short Server::port() const { return impl_->bound_port; }

Gateway& Server::gateway() { return *impl_->gateway; }

}  // namespace covol::server
