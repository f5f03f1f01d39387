#include <deque>

#include "httplib.h"
#include "json.hpp"
#include "skytalk/protocol.hpp"

namespace skytalk {
namespace {

constexpr std::size_t kCacheCapacity = 1 << 16;

struct Reply {
  int status = 500;
  std::string body;
};

std::string error_body(std::string_view message) {
  return nlohmann::json{{"error", message}}.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace

struct ProtocolServer::Impl {
  struct Entry {
    std::once_flag once;
    Reply reply;
  };

  httplib::Server server;
  std::mutex mutex;
  std::unordered_map<std::string, std::shared_ptr<Entry>> cache;
  std::deque<std::string> order;

  std::shared_ptr<Entry> entry_for(const std::string& key) {
    std::lock_guard lock(mutex);
    auto [it, inserted] = cache.try_emplace(key);
    if (inserted) {
      it->second = std::make_shared<Entry>();
      order.push_back(key);
      if (order.size() > kCacheCapacity) {
        cache.erase(order.front());
        order.pop_front();
      }
    }
    return it->second;
  }
};

ProtocolServer::ProtocolServer(ControllerBackend* controller, PerceptionBackend* perception)
    : impl_(std::make_unique<Impl>()) {
  auto serve = [this](std::function<Reply(const std::string&)> handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      Reply reply;
      auto compute = [&] {
        Reply out;
        try {
          out = handler(req.body);
        } catch (const ProtocolError& e) {
          out = {400, error_body(e.what())};
        } catch (const BackendError& e) {
          out = {502, error_body(e.what())};
        } catch (const std::exception& e) {
          out = {500, error_body(e.what())};
        }
        return out;
      };
      const std::string key = req.get_header_value(std::string(kIdempotencyHeader));
      if (key.empty()) {
        reply = {400, error_body("missing Idempotency-Key header")};
      } else {
        auto entry = impl_->entry_for(req.path + "\n" + key);
        std::call_once(entry->once, [&] { entry->reply = compute(); });
        reply = entry->reply;
      }
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    };
  };

  if (controller) {
    impl_->server.Post(std::string(kControllerTurnPath), serve([this, controller](const std::string& body) {
      const auto request = decode_controller_request(body);
      ++backend_calls_;
      return Reply{200, encode_controller_response(controller->next_turn(request.history, request.mode))};
    }));
    impl_->server.Post(std::string(kControllerSummaryPath), serve([this, controller](const std::string& body) {
      const auto request = decode_controller_request(body);
      ++backend_calls_;
      return Reply{200, encode_controller_response(controller->summary(request.history))};
    }));
  }
  if (perception) {
    impl_->server.Post(std::string(kPerceptionQueryPath), serve([this, perception](const std::string& body) {
      const auto request = decode_perception_request(body);
      ++backend_calls_;
      return Reply{200, encode_perception_response(perception->query(request))};
    }));
  }
}

ProtocolServer::~ProtocolServer() { stop(); }

int ProtocolServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
  } else {
    port_ = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw BackendError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void ProtocolServer::listen(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!impl_->server.listen(host, port)) throw BackendError("cannot listen on " + host + ":" + std::to_string(port));
}

void ProtocolServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string ProtocolServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace skytalk
