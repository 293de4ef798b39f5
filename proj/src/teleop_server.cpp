#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "dipa/teleop.hpp"

namespace dipa::teleop {
namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

class Connection;

}  // namespace

struct Server::Impl {
  ServerOptions options;
  SessionState session;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  net::steady_timer timer{ioc};
  std::shared_ptr<Connection> client;
  std::thread thread;
  std::atomic<bool> running{false};
  std::mutex stop_mutex;
  std::condition_variable stopped;
  bool has_stopped = false;
  unsigned short bound_port = 0;

  explicit Impl(ServerOptions o) : options(std::move(o)), session(options.initial) {}

  void log(const std::string& line) {
    if (options.log) options.log(line);
  }
  void accept();
  void schedule_tick();
  void dispatch(const json& msg);
  void deliver(const std::vector<json>& out);
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Server::Impl* owner) : ws_(std::move(socket)), owner_(owner) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->owner_->log("handshake failed: " + ec.message());
      self->read();
    });
  }

  void send(const json& msg) {
    outbox_.push_back(msg.dump());
    if (outbox_.size() == 1) write();
  }

  void close() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        if (self->owner_->client == self) self->owner_->client.reset();
        return;
      }
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      json msg = json::parse(text, nullptr, false);
      if (msg.is_discarded())
        self->send({{"type", "error"}, {"reason", "malformed JSON"}});
      else
        self->owner_->dispatch(msg);
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return;
                      self->outbox_.pop_front();
                      if (!self->outbox_.empty()) self->write();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  Server::Impl* owner_;
};

}  // namespace

void Server::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    if (client) {
      // one session per server: the newer client replaces the older one
      client->close();
    }
    client = std::make_shared<Connection>(std::move(socket), this);
    client->start();
    log("client connected");
    accept();
  });
}

void Server::Impl::schedule_tick() {
  if (options.tick_ms <= 0) return;
  timer.expires_after(std::chrono::milliseconds(options.tick_ms));
  timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    auto r = handle_message(std::move(session), json{{"type", "tick"}});
    session = std::move(r.session);
    deliver(r.outbound);
    schedule_tick();
  });
}

void Server::Impl::dispatch(const json& msg) {
  if (options.tick_ms > 0 && msg.is_object() && msg.value("type", "") == "tick") {
    deliver({{{"type", "error"}, {"of", "tick"}, {"reason", "the server drives the clock"}}});
    return;
  }
  auto r = handle_message(std::move(session), msg);
  session = std::move(r.session);
  deliver(r.outbound);
}

void Server::Impl::deliver(const std::vector<json>& out) {
  if (!client) return;
  for (const auto& m : out) client->send(m);
}

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() { stop(); }

void Server::start() {
  auto& im = *impl_;
  tcp::endpoint ep(net::ip::make_address(im.options.address), im.options.port);
  im.acceptor.open(ep.protocol());
  im.acceptor.set_option(net::socket_base::reuse_address(true));
  im.acceptor.bind(ep);
  im.acceptor.listen();
  im.bound_port = im.acceptor.local_endpoint().port();
  im.accept();
  im.schedule_tick();
  im.running = true;
  im.thread = std::thread([&im] {
    im.ioc.run();
    std::lock_guard lock(im.stop_mutex);
    im.has_stopped = true;
    im.stopped.notify_all();
  });
  im.log("listening on " + im.options.address + ":" + std::to_string(port()));
}

void Server::stop() {
  auto& im = *impl_;
  if (!im.running.exchange(false)) return;
  net::post(im.ioc, [&im] {
    beast::error_code ec;
    im.acceptor.close(ec);
    im.timer.cancel();
    if (im.client) im.client->close();
    im.client.reset();
    im.ioc.stop();
  });
  if (im.thread.joinable()) im.thread.join();
}

void Server::wait() {
  auto& im = *impl_;
  std::unique_lock lock(im.stop_mutex);
  im.stopped.wait(lock, [&im] { return im.has_stopped; });
}

unsigned short Server::port() const { return impl_->bound_port; }

}  // namespace dipa::teleop
