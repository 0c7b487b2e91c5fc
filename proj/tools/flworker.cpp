#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "daemon_util.h"
#include "fl/common/error.h"
#include "fl/common/net.h"
#include "fl/worker/worker_service.h"

int main(int argc, char** argv) {
  sigset_t stop = fl::tools::BlockStopSignals();
  fl::worker::WorkerConfig c;
  std::string listen = "127.0.0.1:0";
  std::string metrics = "127.0.0.1:0";
  std::string log_level = "info";
  bool no_multicast = false;

  CLI::App app{"flworker: executes functions for a core"};
  app.set_config("--config");
  app.add_option("--state-dir", c.state_dir, "Directory holding the persistent worker id and epoch")
      ->envname("FL_WORKER_STATE");
  app.add_option("--listen", listen, "host:port the core dials")->capture_default_str();
  app.add_option("--advertise", c.advertise_address, "host:port put in announces (default: --listen)");
  app.add_option("--metrics", metrics, "host:port of the metrics endpoint")->capture_default_str();
  app.add_option("--capacity-mb", c.capacity_mb)->capture_default_str();
  app.add_option("--cache-threshold-bytes", c.cache_threshold_bytes)->capture_default_str();
  app.add_option("--ttl-ms", c.ttl_ms)->capture_default_str();
  app.add_option("--metrics-period-ms", c.metrics_period_ms)->capture_default_str();
  app.add_option("--announce-period-ms", c.announce_period_ms)->capture_default_str();
  app.add_option("--beacon-period-ms", c.beacon_period_ms)->capture_default_str();
  app.add_option("--sweep-period-ms", c.sweep_period_ms)->capture_default_str();
  app.add_option("--core", c.core_address, "Core discovery address for unicast announces")
      ->envname("FL_CORE_DISCOVERY");
  app.add_flag("--no-multicast", no_multicast);
  app.add_option("--multicast-group", c.multicast_group)->capture_default_str();
  app.add_option("--multicast-port", c.multicast_port)->capture_default_str();
  app.add_option("--allow", c.http_allowlist, "Host patterns guests may reach over HTTP")->capture_default_str();
  app.add_option("--parallelism", c.parallelism, "Concurrent invocations (0: CPUs)")->capture_default_str();
  app.add_option("--log-level", log_level)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  c.multicast = !no_multicast;
  fl::tools::SetLogLevel(log_level);

  try {
    auto l = fl::net::ParseHostPort(listen);
    auto m = fl::net::ParseHostPort(metrics);
    c.listen_host = l.host;
    c.listen_port = l.port;
    c.metrics_host = m.host;
    c.metrics_port = m.port;
    fl::worker::WorkerService worker(c);
    worker.Start();
    std::printf("ready listen=%u metrics=%u id=%s epoch=%llu\n", worker.listen_port(), worker.metrics_port(),
                worker.id().ToHex().c_str(), static_cast<unsigned long long>(worker.epoch()));
    std::fflush(stdout);
    int sig = fl::tools::WaitForStopSignal(stop);
    spdlog::info("signal {}, stopping", sig);
    worker.Stop();
  } catch (const std::exception& e) {
    std::cerr << "flworker: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
