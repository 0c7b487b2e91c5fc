#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

namespace fl::worker {

// Host patterns: "*" matches everything, "*.example.org" matches subdomains,
// anything else must equal the host exactly (case-insensitive).
class HttpAllowlist {
 public:
  HttpAllowlist() : patterns_{"*"} {}
  explicit HttpAllowlist(std::vector<std::string> patterns) : patterns_(std::move(patterns)) {}

  bool Allows(std::string_view host) const;

 private:
  std::vector<std::string> patterns_;
};

// Performs the guest's request {"method","url","headers","body"(base64),
// "timeout_ms"} and returns {"status_code","headers","body"(base64)} or
// {"error":...}. Gives up at `deadline` regardless of timeout_ms.
std::string PerformHttp(std::string_view request_json, std::chrono::steady_clock::time_point deadline,
                        const HttpAllowlist& allowlist);

}  // namespace fl::worker
