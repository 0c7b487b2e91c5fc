#include "fl/cli/cli.h"

#include <httplib.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

namespace fl::cli {

using json = nlohmann::json;

namespace {

struct Failure {
  int code;
  std::string message;
};

std::string ReadFileOrThrow(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitUsage, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Failure{kExitUsage, "cannot read " + path};
  return ss.str();
}

// Flags win over environment, environment over the config file.
CliConfig Resolve(const std::optional<std::string>& flag_url, const std::optional<std::string>& flag_token,
                  const std::optional<int64_t>& flag_timeout, const std::string& config_path,
                  const EnvLookup& env) {
  CliConfig c;
  std::ifstream in(config_path);
  if (in) {
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded() || !file.is_object()) throw Failure{kExitUsage, "bad config file " + config_path};
    if (file.contains("core_url") && file["core_url"].is_string()) c.core_url = file["core_url"];
    if (file.contains("token") && file["token"].is_string()) c.token = file["token"];
    if (file.contains("default_timeout_ms") && file["default_timeout_ms"].is_number_integer()) {
      c.default_timeout_ms = file["default_timeout_ms"];
    }
  }
  if (auto v = env("FL_CORE_URL")) c.core_url = *v;
  if (auto v = env("FL_TOKEN")) c.token = *v;
  if (flag_url) c.core_url = *flag_url;
  if (flag_token) c.token = *flag_token;
  if (flag_timeout) c.default_timeout_ms = *flag_timeout;
  if (c.core_url.rfind("http://", 0) != 0) throw Failure{kExitUsage, "core url must start with http://"};
  return c;
}

class Api {
 public:
  explicit Api(const CliConfig& c) : client_(c.core_url), config_(c) {
    client_.set_bearer_token_auth(c.token);
    client_.set_connection_timeout(5);
    int64_t read_s = c.default_timeout_ms > 0 ? c.default_timeout_ms / 1000 + 5 : 300;
    client_.set_read_timeout(static_cast<time_t>(read_s));
    client_.set_write_timeout(60);
  }

  httplib::Result Do(const std::string& method, const std::string& path, const std::string& body = "",
                     const std::string& content_type = "application/json") {
    httplib::Headers headers;
    if (config_.default_timeout_ms > 0) headers.emplace("X-Fl-Timeout-Ms", std::to_string(config_.default_timeout_ms));
    httplib::Result r;
    if (method == "GET") {
      r = client_.Get(path, headers);
    } else if (method == "POST") {
      r = client_.Post(path, headers, body, content_type);
    } else if (method == "PUT") {
      r = client_.Put(path, headers, body, content_type);
    } else {
      r = client_.Delete(path, headers);
    }
    if (!r) throw Failure{kExitUsage, "cannot reach core at " + config_.core_url + ": " + httplib::to_string(r.error())};
    return r;
  }

 private:
  httplib::Client client_;
  CliConfig config_;
};

// Non-2xx responses end the command with exit 1.
json ExpectOk(const httplib::Result& r) {
  json body = json::parse(r->body, nullptr, false);
  if (r->status >= 200 && r->status < 300) return body;
  std::string kind = body.is_object() && body.contains("kind") ? body["kind"].get<std::string>() : "HTTP";
  std::string msg = body.is_object() && body.contains("message") ? body["message"].get<std::string>() : r->body;
  throw Failure{kExitPlatformError, kind + " (" + std::to_string(r->status) + "): " + msg};
}

std::string FnPath(const std::string& module, const std::string& name) {
  return "/v1/fn/" + httplib::detail::encode_url(module) + "/" + httplib::detail::encode_url(name);
}

void PrintTable(std::ostream& out, const std::vector<std::string>& head,
                const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width(head.size());
  for (size_t i = 0; i < head.size(); ++i) width[i] = head[i].size();
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i + 1 == cells.size()) {
        out << cells[i] << "\n";
      } else {
        out << std::left << std::setw(static_cast<int>(width[i])) << cells[i] << "  ";
      }
    }
  };
  line(head);
  for (const auto& r : rows) line(r);
}

std::string Str(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

EnvLookup ProcessEnv() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
  };
}

std::string DefaultConfigPath(const EnvLookup& env) {
  if (auto xdg = env("XDG_CONFIG_HOME"); xdg && !xdg->empty()) return *xdg + "/fl/config.json";
  if (auto home = env("HOME"); home && !home->empty()) return *home + "/.config/fl/config.json";
  return ".fl.json";
}

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"fl: client for the function platform"};
  app.require_subcommand(1);
  std::optional<std::string> url;
  std::optional<std::string> token;
  std::optional<int64_t> timeout;
  std::string config_path = DefaultConfigPath(env);
  bool as_json = false;
  app.add_option("--core-url", url, "Core base URL (env FL_CORE_URL)");
  app.add_option("--token", token, "Bearer token (env FL_TOKEN)");
  app.add_option("--timeout-ms", timeout, "Invocation deadline sent to the core");
  app.add_option("--config", config_path, "JSON config file")->capture_default_str();
  app.add_flag("--json", as_json, "Machine-readable output");

  std::string module, name, file, address, args_text = "{}";
  std::optional<uint32_t> memory_mb;
  auto* upload = app.add_subcommand("upload", "Create a function from a wasm file");
  auto* update = app.add_subcommand("update", "Replace a function's wasm");
  for (auto* sub : {upload, update}) {
    sub->add_option("module", module)->required();
    sub->add_option("name", name)->required();
    sub->add_option("wasm", file, "Path to the .wasm file")->required();
    sub->add_option("--memory-mb", memory_mb, "Reserved memory in MiB");
  }
  auto* del = app.add_subcommand("delete", "Delete a function");
  auto* get = app.add_subcommand("get", "Show a function's metadata");
  for (auto* sub : {del, get}) {
    sub->add_option("module", module)->required();
    sub->add_option("name", name)->required();
  }
  auto* invoke = app.add_subcommand("invoke", "Invoke a function");
  invoke->add_option("module", module)->required();
  invoke->add_option("name", name)->required();
  invoke->add_option("args", args_text, "JSON arguments or @file")->capture_default_str();
  auto* list = app.add_subcommand("list", "List functions");
  auto* workers = app.add_subcommand("workers", "Show the worker registry");
  auto* connect = app.add_subcommand("connect", "Ask the core to dial a worker");
  connect->add_option("address", address, "host:port")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "fl: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    CliConfig config = Resolve(url, token, timeout, config_path, env);
    Api api(config);

    if (upload->parsed() || update->parsed()) {
      std::string wasm = ReadFileOrThrow(file);
      std::string path = FnPath(module, name);
      if (memory_mb) path += "?memory_mb=" + std::to_string(*memory_mb);
      json d = ExpectOk(api.Do(upload->parsed() ? "POST" : "PUT", path, wasm, "application/wasm"));
      out << (as_json ? d.dump() : module + "/" + name) << "\n";
    } else if (del->parsed()) {
      ExpectOk(api.Do("DELETE", FnPath(module, name)));
      if (as_json) out << json{{"deleted", module + "/" + name}}.dump() << "\n";
    } else if (get->parsed()) {
      out << ExpectOk(api.Do("GET", FnPath(module, name))).dump() << "\n";
    } else if (invoke->parsed()) {
      if (!args_text.empty() && args_text[0] == '@') args_text = ReadFileOrThrow(args_text.substr(1));
      if (!json::accept(args_text)) throw Failure{kExitUsage, "arguments are not valid JSON"};
      auto r = api.Do("POST", "/v1/invoke/" + httplib::detail::encode_url(module) + "/" +
                                  httplib::detail::encode_url(name),
                      args_text);
      json body = json::parse(r->body, nullptr, false);
      if (r->status == 200 && body.is_object() && body.value("status", "") == "ok") {
        out << (as_json ? body.dump() : body["payload"].dump()) << "\n";
        return kExitOk;
      }
      if (as_json && body.is_object()) out << body.dump() << "\n";
      if (r->status == 200 && body.is_object() && body.value("kind", "") == "FunctionError") {
        err << "FunctionError: " << body.value("message", "") << "\n";
        return kExitFunctionError;
      }
      ExpectOk(r);
      throw Failure{kExitPlatformError, "unexpected response: " + r->body};
    } else if (list->parsed()) {
      json fns = ExpectOk(api.Do("GET", "/v1/fn"));
      if (as_json) {
        out << fns.dump() << "\n";
      } else {
        std::vector<std::vector<std::string>> rows;
        for (const auto& f : fns) {
          rows.push_back({Str(f["module"]), Str(f["name"]), Str(f["memory_mb"]), Str(f["wasm_bytes"]),
                          Str(f["updated_at"])});
        }
        PrintTable(out, {"MODULE", "NAME", "MEMORY_MB", "WASM_BYTES", "UPDATED_AT"}, rows);
      }
    } else if (workers->parsed()) {
      json ws = ExpectOk(api.Do("GET", "/v1/admin/workers"));
      if (as_json) {
        out << ws.dump() << "\n";
      } else {
        std::vector<std::vector<std::string>> rows;
        for (const auto& w : ws) {
          rows.push_back({Str(w["worker_id"]), Str(w["address"]), Str(w["capacity_mb"]),
                          Str(w["free_memory_mb"]), Str(w["in_flight"]),
                          w["live"].get<bool>() ? "yes" : "no"});
        }
        PrintTable(out, {"WORKER", "ADDRESS", "CAPACITY_MB", "FREE_MB", "IN_FLIGHT", "LIVE"}, rows);
      }
    } else if (connect->parsed()) {
      json r = ExpectOk(api.Do("POST", "/v1/admin/connect", json{{"address", address}}.dump()));
      out << (as_json ? r.dump() : Str(r["worker_id"])) << "\n";
    }
  } catch (const Failure& f) {
    err << "fl: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    err << "fl: " << e.what() << "\n";
    return kExitPlatformError;
  }
  return kExitOk;
}

}  // namespace fl::cli
