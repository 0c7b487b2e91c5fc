#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace fl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPlatformError = 1;
inline constexpr int kExitUsage = 2;  // also local I/O failures
inline constexpr int kExitFunctionError = 3;

struct CliConfig {
  std::string core_url = "http://127.0.0.1:8080";
  std::string token;
  int64_t default_timeout_ms = 0;  // 0: leave it to the core
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup ProcessEnv();

// $XDG_CONFIG_HOME/fl/config.json, falling back to ~/.config/fl/config.json.
std::string DefaultConfigPath(const EnvLookup& env);

// Runs one `fl` command. args excludes the program name.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env = ProcessEnv());

}  // namespace fl::cli
