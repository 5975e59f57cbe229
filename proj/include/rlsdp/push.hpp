#pragma once

// WebSocket broadcaster: every connected client receives every published
// message, in publication order.

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace rlsdp {

namespace push_detail {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

class Hub;

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Hub& hub) : ws_(std::move(socket)), hub_(hub) {}

  void start();
  void send(std::shared_ptr<const std::string> message);

 private:
  void write_next();
  void read_loop();
  void close();

  websocket::stream<beast::tcp_stream> ws_;
  Hub& hub_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool open_ = false;
};

class Hub {
 public:
  void join(const std::shared_ptr<Session>& s) {
    std::lock_guard lock(mu_);
    sessions_.insert(s);
  }
  void leave(const std::shared_ptr<Session>& s) {
    std::lock_guard lock(mu_);
    sessions_.erase(s);
  }
  std::set<std::shared_ptr<Session>> sessions() const {
    std::lock_guard lock(mu_);
    return sessions_;
  }

 private:
  mutable std::mutex mu_;
  std::set<std::shared_ptr<Session>> sessions_;
};

inline void Session::start() {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->open_ = true;
    self->hub_.join(self);
    self->write_next();
    self->read_loop();
  });
}

inline void Session::send(std::shared_ptr<const std::string> message) {
  asio::post(ws_.get_executor(), [self = shared_from_this(), message] {
    self->queue_.push_back(message);
    if (self->queue_.size() == 1 && self->open_) self->write_next();
  });
}

inline void Session::write_next() {
  if (queue_.empty() || !open_) return;
  ws_.text(true);
  ws_.async_write(asio::buffer(*queue_.front()),
                  [self = shared_from_this()](beast::error_code ec, std::size_t) {
                    if (ec) return self->close();
                    self->queue_.pop_front();
                    self->write_next();
                  });
}

// Client frames are read and discarded; reading notices disconnects.
inline void Session::read_loop() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) return self->close();
    self->buffer_.consume(self->buffer_.size());
    self->read_loop();
  });
}

inline void Session::close() {
  open_ = false;
  queue_.clear();
  hub_.leave(shared_from_this());
}

}  // namespace push_detail

class PushServer {
 public:
  /// Binds immediately; port 0 picks a free port.
  explicit PushServer(std::uint16_t port, const std::string& address = "0.0.0.0")
      : acceptor_(io_, {push_detail::asio::ip::make_address(address), port}) {
    accept();
    thread_ = std::thread([this] { io_.run(); });
  }

  ~PushServer() { stop(); }

  PushServer(const PushServer&) = delete;
  PushServer& operator=(const PushServer&) = delete;

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  std::size_t client_count() const { return hub_.sessions().size(); }

  void broadcast(const std::string& message) {
    auto shared = std::make_shared<const std::string>(message);
    for (const auto& s : hub_.sessions()) s->send(shared);
  }

  void stop() {
    if (!thread_.joinable()) return;
    io_.stop();
    thread_.join();
  }

 private:
  void accept() {
    acceptor_.async_accept(push_detail::asio::make_strand(io_),
                           [this](boost::beast::error_code ec, push_detail::tcp::socket socket) {
                             if (ec == push_detail::asio::error::operation_aborted) return;
                             if (!ec) std::make_shared<push_detail::Session>(std::move(socket), hub_)->start();
                             accept();
                           });
  }

  push_detail::asio::io_context io_;
  push_detail::tcp::acceptor acceptor_;
  push_detail::Hub hub_;
  std::thread thread_;
};

}  // namespace rlsdp
