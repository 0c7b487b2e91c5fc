#include "fl/worker/host_http.h"

#include <httplib.h>

#include <algorithm>
#include <json.hpp>

#include "fl/common/base64.h"

namespace fl::worker {

namespace {

using nlohmann::json;

constexpr int64_t kDefaultTimeoutMs = 30'000;

std::string ErrorReply(const std::string& message) { return json{{"error", message}}.dump(); }

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path = "/";
};

// http://host[:port][/path]; https is not offered to guests.
bool ParseUrl(std::string_view url, ParsedUrl& out, std::string& error) {
  constexpr std::string_view kScheme = "http://";
  if (url.substr(0, kScheme.size()) != kScheme) {
    error = "unsupported url scheme";
    return false;
  }
  url.remove_prefix(kScheme.size());
  size_t slash = url.find('/');
  std::string_view authority = url.substr(0, slash);
  if (slash != std::string_view::npos) out.path = std::string(url.substr(slash));
  if (authority.empty()) {
    error = "url has no host";
    return false;
  }
  size_t colon = authority.rfind(':');
  if (colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
    out.host = std::string(authority.substr(0, colon));
    std::string port(authority.substr(colon + 1));
    if (port.empty() || port.size() > 5 || !std::all_of(port.begin(), port.end(), ::isdigit) ||
        std::stoi(port) > 65535 || std::stoi(port) == 0) {
      error = "bad port in url";
      return false;
    }
    out.port = std::stoi(port);
  } else {
    out.host = std::string(authority);
  }
  return !out.host.empty();
}

}  // namespace

bool HttpAllowlist::Allows(std::string_view host) const {
  std::string h = Lower(host);
  for (const auto& raw : patterns_) {
    std::string p = Lower(raw);
    if (p == "*") return true;
    if (p.size() > 2 && p[0] == '*' && p[1] == '.') {
      std::string_view suffix(p);
      suffix.remove_prefix(1);
      if (h.size() > suffix.size() && h.compare(h.size() - suffix.size(), suffix.size(), suffix) == 0) return true;
    } else if (p == h) {
      return true;
    }
  }
  return false;
}

std::string PerformHttp(std::string_view request_json, std::chrono::steady_clock::time_point deadline,
                        const HttpAllowlist& allowlist) {
  json req = json::parse(request_json, nullptr, false);
  if (req.is_discarded() || !req.is_object()) return ErrorReply("request is not a JSON object");

  std::string method = req.value("method", "GET");
  std::transform(method.begin(), method.end(), method.begin(), ::toupper);
  if (!req.contains("url") || !req["url"].is_string()) return ErrorReply("request has no url");

  ParsedUrl url;
  std::string error;
  if (!ParseUrl(req["url"].get<std::string>(), url, error)) return ErrorReply(error);
  if (!allowlist.Allows(url.host)) return ErrorReply("denied");

  std::string body;
  if (req.contains("body")) {
    if (!req["body"].is_string()) return ErrorReply("body must be base64 text");
    auto decoded = Base64Decode(req["body"].get<std::string>());
    if (!decoded) return ErrorReply("body is not valid base64");
    body = std::move(*decoded);
  }

  httplib::Headers headers;
  std::string content_type = "application/octet-stream";
  if (req.contains("headers")) {
    if (!req["headers"].is_object()) return ErrorReply("headers must be an object");
    for (const auto& [k, v] : req["headers"].items()) {
      if (!v.is_string()) return ErrorReply("header values must be strings");
      if (Lower(k) == "content-type") {
        content_type = v.get<std::string>();
      } else {
        headers.emplace(k, v.get<std::string>());
      }
    }
  }

  int64_t timeout_ms = kDefaultTimeoutMs;
  if (req.contains("timeout_ms")) {
    if (!req["timeout_ms"].is_number_integer() || req["timeout_ms"].get<int64_t>() <= 0) {
      return ErrorReply("timeout_ms must be a positive integer");
    }
    timeout_ms = req["timeout_ms"].get<int64_t>();
  }
  auto now = std::chrono::steady_clock::now();
  if (deadline <= now) return ErrorReply("timeout");
  auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
  timeout_ms = std::max<int64_t>(1, std::min<int64_t>(timeout_ms, remaining));

  httplib::Client client(url.host, url.port);
  auto tv_sec = static_cast<time_t>(timeout_ms / 1000);
  auto tv_usec = static_cast<time_t>(timeout_ms % 1000 * 1000);
  client.set_connection_timeout(tv_sec, tv_usec);
  client.set_read_timeout(tv_sec, tv_usec);
  client.set_write_timeout(tv_sec, tv_usec);

  auto started = std::chrono::steady_clock::now();
  httplib::Result res;
  if (method == "GET") {
    res = client.Get(url.path, headers);
  } else if (method == "POST") {
    res = client.Post(url.path, headers, body, content_type);
  } else if (method == "PUT") {
    res = client.Put(url.path, headers, body, content_type);
  } else if (method == "DELETE") {
    res = client.Delete(url.path, headers, body, content_type);
  } else if (method == "HEAD") {
    res = client.Head(url.path, headers);
  } else {
    return ErrorReply("unsupported method " + method);
  }

  if (!res) {
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    if (res.error() == httplib::Error::ConnectionTimeout || elapsed.count() >= timeout_ms) {
      return ErrorReply("timeout");
    }
    return ErrorReply(httplib::to_string(res.error()));
  }

  json reply_headers = json::object();
  for (const auto& [k, v] : res->headers) reply_headers[k] = v;
  return json{{"status_code", res->status}, {"headers", reply_headers}, {"body", Base64Encode(res->body)}}.dump(
      -1, ' ', false, json::error_handler_t::replace);
}

}  // namespace fl::worker
