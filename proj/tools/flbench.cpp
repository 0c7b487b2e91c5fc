#include <signal.h>

#include <httplib.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>

#include "fl/bench/bench.h"
#include "fl/common/error.h"
#include "fl/common/net.h"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using fl::bench::LoadPlan;

struct BenchSpec {
  std::string function;  // name under module "bench"
  std::string wasm;      // file in the guest dir
  int threads;
  int requests;
};

// Default load shapes.
const std::map<std::string, BenchSpec> kBenches = {
    {"hello", {"hello", "hello.wasm", 4, 200}},
    {"sleep", {"sleep", "sleep.wasm", 4, 25}},
    {"server-reply", {"server_reply", "server_reply.wasm", 4, 200}},
    {"network", {"network_benchmark", "network_benchmark.wasm", 1, 50}},
    {"matrixmult", {"matrix_mult", "matrix_mult.wasm", 4, 200}},
};

std::string RandomMatrices(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> dist(-100, 100);
  json a = json::array(), b = json::array();
  for (int i = 0; i < n; ++i) {
    json ra = json::array(), rb = json::array();
    for (int j = 0; j < n; ++j) {
      ra.push_back(dist(rng));
      rb.push_back(dist(rng));
    }
    a.push_back(ra);
    b.push_back(rb);
  }
  return json{{"a", a}, {"b", b}}.dump();
}

void WriteFile(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::trunc);
  out << content;
  if (!out) throw fl::Error(fl::ErrorCode::kIo, "cannot write " + p.string());
}

}  // namespace

int main(int argc, char** argv) {
  signal(SIGPIPE, SIG_IGN);
  CLI::App app{"flbench: load generation, latency CDFs and memory sampling"};
  app.require_subcommand(1);

  std::string core_url = "http://127.0.0.1:8080";
  std::string token;
  std::string bench = "hello";
  std::string out_dir = "bench-out";
  std::string guest_dir = FL_GUEST_DIR;
  std::string target_url;
  int threads = 0, requests = 0, repeat = 5, matrix_n = 100;
  int64_t timeout_ms = 0;
  uint32_t memory_mb = 64;
  auto* run = app.add_subcommand("run", "Run a load plan against the core");
  run->add_option("--core-url", core_url)->envname("FL_CORE_URL")->capture_default_str();
  run->add_option("--token", token)->envname("FL_TOKEN");
  run->add_option("--bench", bench)->check(CLI::IsMember({"hello", "sleep", "server-reply", "network", "matrixmult"}))
      ->capture_default_str();
  run->add_option("--threads", threads, "Default depends on the benchmark");
  run->add_option("--requests", requests, "Sequential requests per thread");
  run->add_option("--repeat", repeat)->capture_default_str();
  run->add_option("--out", out_dir)->capture_default_str();
  run->add_option("--guest-dir", guest_dir, "Where the benchmark .wasm files live")->capture_default_str();
  run->add_option("--memory-mb", memory_mb, "Reserved memory when uploading")->capture_default_str();
  run->add_option("--target-url", target_url, "HTTP target for network guests (default: built-in echo server)");
  run->add_option("--matrix-n", matrix_n)->capture_default_str();
  run->add_option("--timeout-ms", timeout_ms);

  std::vector<std::string> procs;
  double duration = 300, rate = 1;
  std::string mem_out;
  auto* mem = app.add_subcommand("memsample", "Sample resident memory of processes");
  mem->add_option("--procs", procs, "pids or process names")->required();
  mem->add_option("--duration", duration, "Seconds")->capture_default_str();
  mem->add_option("--rate", rate, "Samples per second")->capture_default_str();
  mem->add_option("--out", mem_out, "CSV file (default: stdout)");

  std::string bind = "127.0.0.1:8099";
  auto* echo = app.add_subcommand("echo", "Run the echo HTTP server");
  echo->add_option("--bind", bind)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const BenchSpec& spec = kBenches.at(bench);
      LoadPlan plan;
      plan.function_id = {"bench", spec.function};
      plan.threads = threads > 0 ? threads : spec.threads;
      plan.requests_per_thread = requests > 0 ? requests : spec.requests;
      plan.timeout_ms = timeout_ms;
      fl::bench::Endpoint core{core_url, token};

      // Upload if missing; 409 means it is already there.
      {
        httplib::Client c(core_url);
        c.set_bearer_token_auth(token);
        std::ifstream in(fs::path(guest_dir) / spec.wasm, std::ios::binary);
        if (!in) throw fl::Error(fl::ErrorCode::kIo, "missing " + (fs::path(guest_dir) / spec.wasm).string());
        std::string wasm((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        auto r = c.Post("/v1/fn/bench/" + spec.function + "?memory_mb=" + std::to_string(memory_mb), wasm,
                        "application/wasm");
        if (!r) throw fl::Error(fl::ErrorCode::kIo, "core unreachable at " + core_url);
        if (r->status != 201 && r->status != 409) {
          throw fl::Error(fl::ErrorCode::kIo, "upload failed: " + std::to_string(r->status) + " " + r->body);
        }
      }

      fl::bench::EchoServer echo_server;
      if ((bench == "server-reply" || bench == "network") && target_url.empty()) {
        uint16_t port = echo_server.Start("127.0.0.1", 0);
        target_url = "http://127.0.0.1:" + std::to_string(port) + "/echo";
      }
      std::mt19937_64 rng(42);
      if (bench == "hello") {
        plan.args = R"({"name":"bench"})";
      } else if (bench == "server-reply") {
        plan.args_for = [&](int t, int i) {
          return json{{"target_url", target_url}, {"message", "msg-" + std::to_string(t) + "-" + std::to_string(i)}}
              .dump();
        };
      } else if (bench == "network") {
        plan.args = json{{"target_url", target_url}, {"count", 16}}.dump();
      } else if (bench == "matrixmult") {
        plan.args = RandomMatrices(rng, matrix_n);
      }

      fs::create_directories(out_dir);
      for (int k = 1; k <= repeat; ++k) {
        auto records = fl::bench::RunPlan(plan, core);
        std::string stem = bench + "_run" + std::to_string(k);
        WriteFile(fs::path(out_dir) / (stem + "_records.csv"), fl::bench::EmitRecords(records));
        size_t ok = 0;
        for (const auto& r : records) ok += r.ok();
        try {
          WriteFile(fs::path(out_dir) / (stem + "_cdf.csv"), fl::bench::EmitCdf(records));
          std::printf("%s run %d: %zu requests, %zu ok, p50 %.1f ms, p95 %.1f ms\n", bench.c_str(), k,
                      records.size(), ok, fl::bench::Percentile(records, 0.5),
                      fl::bench::Percentile(records, 0.95));
        } catch (const fl::Error& e) {
          std::printf("%s run %d: %zu requests, all failed (%s)\n", bench.c_str(), k, records.size(), e.what());
        }
      }
    } else if (mem->parsed()) {
      std::vector<pid_t> pids;
      for (const auto& p : procs) pids.push_back(fl::bench::ResolveProcess(p));
      auto rows = fl::bench::SampleMemory(pids, duration, rate);
      std::string csv = fl::bench::EmitMemory(rows);
      if (mem_out.empty()) {
        std::cout << csv;
      } else {
        WriteFile(mem_out, csv);
      }
    } else if (echo->parsed()) {
      auto hp = fl::net::ParseHostPort(bind);
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      fl::bench::EchoServer server;
      uint16_t port = server.Start(hp.host, hp.port);
      std::printf("ready echo=%u\n", port);
      std::fflush(stdout);
      int sig = 0;
      sigwait(&set, &sig);
    }
  } catch (const fl::Error& e) {
    std::cerr << "flbench: " << fl::ErrorCodeName(e.code()) << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
