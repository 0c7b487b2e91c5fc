#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "daemon_util.h"
#include "fl/common/error.h"
#include "fl/common/net.h"
#include "fl/core/core_service.h"

int main(int argc, char** argv) {
  sigset_t stop = fl::tools::BlockStopSignals();
  fl::core::CoreConfig c;
  std::string bind = "127.0.0.1:8080";
  std::string discovery = "0.0.0.0:7856";
  std::string store_dir;
  std::string log_level = "info";
  bool no_multicast = false;
  bool no_discovery = false;

  CLI::App app{"flcore: function registry, scheduler and API"};
  app.set_config("--config");
  app.add_option("--bind", bind, "host:port of the REST API (port 0 picks one)")
      ->envname("FL_CORE_BIND")
      ->capture_default_str();
  app.add_option("--token", c.token, "Bearer token required by the API")->envname("FL_TOKEN")->required();
  app.add_option("--store-dir", store_dir, "Keep functions on disk here (default: in memory)")
      ->envname("FL_STORE_DIR");
  app.add_option("--liveness-timeout-ms", c.liveness_timeout_ms)->capture_default_str();
  app.add_option("--default-timeout-ms", c.default_timeout_ms)->capture_default_str();
  app.add_option("--default-memory-mb", c.default_memory_mb)->capture_default_str();
  app.add_option("--discovery", discovery, "host:port receiving worker announces")->capture_default_str();
  app.add_flag("--no-discovery", no_discovery);
  app.add_flag("--no-multicast", no_multicast);
  app.add_option("--multicast-group", c.multicast_group)->capture_default_str();
  app.add_option("--static-worker", c.static_workers, "Worker address to keep connected (repeatable)");
  app.add_option("--log-level", log_level)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  fl::tools::SetLogLevel(log_level);
  c.multicast = !no_multicast;
  c.discovery = !no_discovery;

  try {
    auto b = fl::net::ParseHostPort(bind);
    auto d = fl::net::ParseHostPort(discovery);
    c.bind_host = b.host;
    c.port = b.port;
    c.discovery_host = d.host;
    c.discovery_port = d.port;
    if (!store_dir.empty()) {
      c.store.backend = fl::StoreConfig::Backend::kFileBacked;
      c.store.root_path = store_dir;
    }
    fl::core::CoreService core(c);
    core.Start();
    std::printf("ready http=%u\n", core.http_port());
    std::fflush(stdout);
    int sig = fl::tools::WaitForStopSignal(stop);
    spdlog::info("signal {}, stopping", sig);
    core.Stop();
  } catch (const std::exception& e) {
    std::cerr << "flcore: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
