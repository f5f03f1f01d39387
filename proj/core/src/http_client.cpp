#include <chrono>
#include <cstdio>
#include <regex>
#include <thread>

#include "httplib.h"
#include "skytalk/protocol.hpp"
#include "skytalk/rng.hpp"

namespace skytalk {
namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string prefix;
};

ParsedUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw std::invalid_argument("bad endpoint URL: " + url);
  std::string prefix = m[2].matched ? m[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

std::uint64_t fresh_client_id() {
  static std::atomic<std::uint64_t> serial{0};
  const auto now = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  return splitmix64(now ^ (serial.fetch_add(1) * 0x9e3779b97f4a7c15ULL));
}

}  // namespace

ProtocolClient::ProtocolClient(BackendEndpoint endpoint)
    : endpoint_(std::move(endpoint)), client_id_(fresh_client_id()) {
  endpoint_.validate();
  split_url(endpoint_.base_url);
}

std::string ProtocolClient::next_idempotency_key() const {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%016llx-%llu", static_cast<unsigned long long>(client_id_),
                static_cast<unsigned long long>(counter_.fetch_add(1)));
  return buf;
}

std::string ProtocolClient::post(std::string_view path, const std::string& body, CallStats* stats) const {
  const ParsedUrl url = split_url(endpoint_.base_url);
  const std::string full_path = url.prefix + std::string(path);
  const std::string key = next_idempotency_key();
  if (stats) {
    stats->attempts = 0;
    stats->idempotency_key = key;
  }

  httplib::Headers headers{{std::string(kIdempotencyHeader), key}};
  if (!endpoint_.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.bearer_token);

  const auto timeout = std::chrono::milliseconds(endpoint_.timeout_ms);
  double backoff_ms = endpoint_.backoff_initial_ms;
  std::string last_failure;
  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(backoff_ms)));
      backoff_ms *= endpoint_.backoff_multiplier;
    }
    if (stats) ++stats->attempts;

    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto result = client.Post(full_path, headers, body, "application/json");
    if (!result) {
      last_failure = "transport: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status >= 200 && status < 300) return result->body;
    if (status >= 500) {
      last_failure = "HTTP " + std::to_string(status);
      continue;
    }
    throw ProtocolError(ProtocolErrorKind::Rejected,
                        "HTTP " + std::to_string(status) + " from " + full_path + ": " + result->body);
  }
  throw ProtocolError(ProtocolErrorKind::ExhaustedRetries,
                      std::to_string(endpoint_.max_retries + 1) + " attempts to " + full_path +
                          " failed, last: " + last_failure);
}

}  // namespace skytalk
