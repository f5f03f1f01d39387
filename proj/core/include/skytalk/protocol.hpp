#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "skytalk/backends.hpp"

namespace skytalk {

inline constexpr std::string_view kSchemaVersion = "1";
inline constexpr std::string_view kPreambleId = "skytalk-preamble-v1";

inline constexpr std::string_view kControllerTurnPath = "/controller/turn";
inline constexpr std::string_view kControllerSummaryPath = "/controller/summary";
inline constexpr std::string_view kPerceptionQueryPath = "/perception/query";
inline constexpr std::string_view kIdempotencyHeader = "Idempotency-Key";

struct BackendEndpoint {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  int timeout_ms = 30000;
  int max_retries = 2;
  int backoff_initial_ms = 200;
  double backoff_multiplier = 2.0;
  std::string bearer_token;  // passed through verbatim when nonempty

  void validate() const;
};

struct ControllerTurnRequest {
  std::vector<Message> history;
  Mode mode = Mode::ActivePerception;
  std::string preamble_id{kPreambleId};
  friend bool operator==(const ControllerTurnRequest&, const ControllerTurnRequest&) = default;
};

enum class ProtocolErrorKind { ExhaustedRetries, MalformedEnvelope, SchemaViolation, Rejected };
std::string_view protocol_error_name(ProtocolErrorKind kind);

class ProtocolError : public BackendError {
 public:
  ProtocolError(ProtocolErrorKind kind, const std::string& message)
      : BackendError(std::string(protocol_error_name(kind)) + ": " + message), kind_(kind) {}
  ProtocolErrorKind kind() const { return kind_; }

 private:
  ProtocolErrorKind kind_;
};

// Wire encoding. Decoders throw ProtocolError(SchemaViolation) on any
// deviation from the v1 schemas in schemas/v1/.
std::string encode_controller_request(const ControllerTurnRequest& request);
ControllerTurnRequest decode_controller_request(std::string_view body);
std::string encode_controller_response(std::string_view text);
std::string decode_controller_response(std::string_view body);
std::string encode_perception_request(const PerceptionQueryRequest& request);
PerceptionQueryRequest decode_perception_request(std::string_view body);
std::string encode_perception_response(const PerceptionQueryResponse& response);
PerceptionQueryResponse decode_perception_response(std::string_view body);

struct PreambleConfig {
  bool early_stop = true;
};

/// Prompt text for an LLM controller: game framing, the seven commands with
/// their distances, the three rule sections, the task goal and (optionally)
/// the early-stop instruction.
std::string build_controller_preamble(const PreambleConfig& config = {});

struct CallStats {
  int attempts = 0;
  std::string idempotency_key;
};

/// POSTs JSON with retries on transport failures and 5xx replies. Every
/// attempt of one call carries the same Idempotency-Key. Safe to share across
/// threads.
class ProtocolClient {
 public:
  explicit ProtocolClient(BackendEndpoint endpoint);

  /// Returns the response body of the first 2xx reply.
  std::string post(std::string_view path, const std::string& body, CallStats* stats = nullptr) const;

  const BackendEndpoint& endpoint() const { return endpoint_; }
  std::string next_idempotency_key() const;

 private:
  BackendEndpoint endpoint_;
  std::uint64_t client_id_;
  mutable std::atomic<std::uint64_t> counter_{0};
};

std::string call_controller(const ProtocolClient& client, const ControllerTurnRequest& request,
                            CallStats* stats = nullptr);
std::string call_controller_summary(const ProtocolClient& client, const ControllerTurnRequest& request,
                                    CallStats* stats = nullptr);
PerceptionQueryResponse call_perception(const ProtocolClient& client, const PerceptionQueryRequest& request,
                                        CallStats* stats = nullptr);

class RemoteController final : public ControllerBackend {
 public:
  explicit RemoteController(std::shared_ptr<const ProtocolClient> client) : client_(std::move(client)) {}
  std::string next_turn(const std::vector<Message>& history, Mode mode) override;
  std::string summary(const std::vector<Message>& history) override;

 private:
  std::shared_ptr<const ProtocolClient> client_;
};

class RemotePerception final : public PerceptionBackend {
 public:
  explicit RemotePerception(std::shared_ptr<const ProtocolClient> client) : client_(std::move(client)) {}
  PerceptionQueryResponse query(const PerceptionQueryRequest& request) override;

 private:
  std::shared_ptr<const ProtocolClient> client_;
};

/// Reference server: exposes a controller and a perception backend over the
/// wire protocol. Replies are cached per Idempotency-Key, so a retried request
/// never reaches a backend twice.
class ProtocolServer {
 public:
  ProtocolServer(ControllerBackend* controller, PerceptionBackend* perception);
  ~ProtocolServer();
  ProtocolServer(const ProtocolServer&) = delete;
  ProtocolServer& operator=(const ProtocolServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  std::string base_url() const;
  /// Number of requests that reached a backend (cache hits excluded).
  std::uint64_t backend_calls() const { return backend_calls_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::string host_;
  std::thread thread_;
  std::atomic<std::uint64_t> backend_calls_{0};
};

}  // namespace skytalk
