#pragma once

#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "guigaze/png_io.hpp"
#include "guigaze/protocol.hpp"

namespace guigaze {

inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back(alphabet[v & 63]);
  }
  if (i + 1 == data.size()) {
    const std::uint32_t v = data[i] << 16;
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == data.size()) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out += "=";
  }
  return out;
}

struct ChatPart {
  enum class Kind { text, image_png_base64 };
  Kind kind = Kind::text;
  std::string value;  // text, or base64-encoded PNG bytes
};

struct ChatMessage {
  std::string role = "user";
  std::vector<ChatPart> parts;
};

/// Minimal chat-completions-style request: one JSON document, images inline
/// as base64 PNG. The full wire schema is documented in the README.
struct ChatRequest {
  std::string model;
  double temperature = 1.0;
  int max_tokens = 1000;
  std::vector<ChatMessage> messages;
};

struct ChatResponse {
  std::string text;
  std::optional<std::vector<double>> token_logprobs;
};

enum class RemoteErrorKind { transport, http_status, malformed_body };

struct remote_error : std::runtime_error {
  RemoteErrorKind kind;
  int status;

  remote_error(RemoteErrorKind k, int http_status, const std::string& msg)
      : std::runtime_error(msg), kind(k), status(http_status) {}
};

struct RemoteConfig {
  std::string url = "http://127.0.0.1:8000/v1/complete";
  std::string model = "default";
  double temperature = 1.0;
  int max_tokens = 1000;
  int timeout_sec = 60;
  int max_retries = 2;  // additional attempts after the first
};

inline nlohmann::json to_json(const ChatRequest& req) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& msg : req.messages) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& part : msg.parts) {
      if (part.kind == ChatPart::Kind::text)
        content.push_back({{"type", "text"}, {"text", part.value}});
      else
        content.push_back({{"type", "image_png_base64"}, {"data", part.value}});
    }
    messages.push_back({{"role", msg.role}, {"content", content}});
  }
  return nlohmann::json{{"model", req.model},
                        {"temperature", req.temperature},
                        {"max_tokens", req.max_tokens},
                        {"messages", messages}};
}

namespace detail {

struct ParsedUrl {
  std::string host_port;  // "host" or "host:port"
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.substr(0, scheme) != "http")
    throw remote_error(RemoteErrorKind::transport, 0,
                       "endpoint must be an http:// URL: " + url);
  const auto rest = url.substr(scheme + 3);
  const auto slash = rest.find('/');
  ParsedUrl p;
  p.host_port = "http://" + (slash == std::string::npos ? rest : rest.substr(0, slash));
  p.path = slash == std::string::npos ? "/" : rest.substr(slash);
  return p;
}

}  // namespace detail

/// POST the request as one JSON document and return the text completion.
/// Connection failures and 5xx responses are retried up to max_retries;
/// what's left after that surfaces as a remote_error with a distinct kind.
inline ChatResponse remote_complete(const RemoteConfig& cfg,
                                    const ChatRequest& req) {
  const auto url = detail::split_url(cfg.url);
  httplib::Client client(url.host_port);
  client.set_connection_timeout(cfg.timeout_sec, 0);
  client.set_read_timeout(cfg.timeout_sec, 0);
  const std::string body = to_json(req).dump();

  httplib::Result result;
  int attempts = 0;
  for (;;) {
    ++attempts;
    result = client.Post(url.path, body, "application/json");
    const bool retryable =
        !result || (result->status >= 500 && result->status <= 599);
    if (!retryable || attempts > cfg.max_retries) break;
  }
  if (!result)
    throw remote_error(RemoteErrorKind::transport, 0,
                       "transport failure after " + std::to_string(attempts) +
                           " attempt(s): " + httplib::to_string(result.error()));
  if (result->status < 200 || result->status >= 300)
    throw remote_error(RemoteErrorKind::http_status, result->status,
                       "server returned HTTP " + std::to_string(result->status));

  const nlohmann::json j =
      nlohmann::json::parse(result->body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object() || !j.contains("text") ||
      !j["text"].is_string())
    throw remote_error(RemoteErrorKind::malformed_body, result->status,
                       "response body is not {\"text\": ...}");
  ChatResponse resp;
  resp.text = j["text"].get<std::string>();
  if (j.contains("logprobs") && j["logprobs"].is_array()) {
    std::vector<double> lps;
    for (const auto& v : j["logprobs"])
      if (v.is_number()) lps.push_back(v.get<double>());
    resp.token_logprobs = std::move(lps);
  }
  return resp;
}

/// Build the one-message request for a stage query: the prompt text plus
/// exactly one inline PNG of the visible image.
inline ChatRequest make_stage_request(const RemoteConfig& cfg,
                                      const std::string& prompt,
                                      const Image& view) {
  ChatRequest req;
  req.model = cfg.model;
  req.temperature = cfg.temperature;
  req.max_tokens = cfg.max_tokens;
  ChatMessage msg;
  msg.role = "user";
  msg.parts.push_back({ChatPart::Kind::text, prompt});
  msg.parts.push_back({ChatPart::Kind::image_png_base64,
                       base64_encode(encode_png(view))});
  req.messages.push_back(std::move(msg));
  return req;
}

/// Policy backed by a remote model server. Remote failures surface as
/// policy_transport_error so episodes are marked errored, never format-failed.
inline PolicyFn make_remote_policy(RemoteConfig cfg) {
  return [cfg = std::move(cfg)](int, const std::string& prompt,
                                const Image& view, Rng&) -> std::string {
    try {
      return remote_complete(cfg, make_stage_request(cfg, prompt, view)).text;
    } catch (const remote_error& e) {
      throw policy_transport_error(e.what());
    }
  };
}

}  // namespace guigaze
