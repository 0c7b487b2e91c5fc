#pragma once

// Randomized checks shared by the unit suites and the acceptance runner.
// Each returns an empty string on success, else a description of the first
// counterexample.

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "cache_model.h"
#include "fl/common/clock.h"
#include "fl/common/error.h"
#include "fl/core/scheduler.h"
#include "fl/protocol/announce.h"
#include "fl/protocol/message.h"
#include "fl/worker/module_cache.h"
#include "random_values.h"

namespace fl::testing {

inline std::string CheckMessageRoundTrips(uint64_t seed, int n) {
  RandomValues r(seed);
  for (int i = 0; i < n; ++i) {
    Message m = r.Msg();
    try {
      if (DecodeMessage(EncodeMessage(m)) != m) return "message " + std::to_string(i) + " changed in round trip";
    } catch (const Error& e) {
      return "message " + std::to_string(i) + " threw " + e.what();
    }
  }
  return "";
}

inline std::string CheckAnnounceRoundTrips(uint64_t seed, int n) {
  RandomValues r(seed);
  for (int i = 0; i < n; ++i) {
    DiscoveryAnnounce a = r.Announce();
    try {
      std::string d = EncodeAnnounce(a);
      if (d.size() > kMaxAnnounceBytes) return "announce " + std::to_string(i) + " too large";
      if (DecodeAnnounce(d) != a) return "announce " + std::to_string(i) + " changed in round trip";
    } catch (const Error& e) {
      return "announce " + std::to_string(i) + " threw " + e.what();
    }
  }
  return "";
}

// One random worker set and requirement, checked against a brute-force
// choice and against a shuffled copy.
inline std::string CheckSchedulerSet(RandomValues& r) {
  using core::WorkerRecord;
  std::vector<WorkerRecord> ws(static_cast<size_t>(r.Int(0, 12)));
  // Small value ranges so ties and exact fits are common.
  const bool coarse = r.Coin();
  for (auto& w : ws) {
    w.worker_id = r.Id<WorkerTag>();
    if (r.Int(0, 5) == 0 && &w != &ws.front()) w.worker_id.bytes[0] = ws.front().worker_id.bytes[0];
    w.capacity_mb = 2048;
    w.last_sample.free_memory_mb = static_cast<uint64_t>(coarse ? r.Int(0, 8) * 128 : r.Int(0, 2048));
    w.pending_reservations_mb = static_cast<uint64_t>(r.Coin() ? 0 : (coarse ? r.Int(0, 4) * 128 : r.Int(0, 2048)));
  }
  uint64_t required = static_cast<uint64_t>(coarse ? r.Int(0, 8) * 128 : r.Int(0, 2100));

  // Oracle: collect qualifiers, best effective free, smallest id among the best.
  const WorkerRecord* want = nullptr;
  int64_t want_free = -1;
  for (const auto& w : ws) {
    int64_t f = static_cast<int64_t>(w.last_sample.free_memory_mb) - static_cast<int64_t>(w.pending_reservations_mb);
    if (f < 0) f = 0;
    if (f < static_cast<int64_t>(required)) continue;
    if (f > want_free || (f == want_free && w.worker_id < want->worker_id)) {
      want = &w;
      want_free = f;
    }
  }

  auto pick = [&](const std::vector<WorkerRecord>& set) -> std::optional<WorkerId> {
    try {
      return core::SelectWorker(set, required).worker_id;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoWorkerAvailable) throw;
      return std::nullopt;
    }
  };

  std::ostringstream why;
  auto got = pick(ws);
  if (!want && got) {
    why << "selected " << got->ToHex() << " with no qualifier for " << required << " MiB";
    return why.str();
  }
  if (want && !got) {
    why << "NoWorkerAvailable although " << want->worker_id.ToHex() << " qualifies for " << required;
    return why.str();
  }
  if (want && *got != want->worker_id) {
    why << "selected " << got->ToHex() << ", expected " << want->worker_id.ToHex();
    return why.str();
  }
  auto shuffled = ws;
  std::shuffle(shuffled.begin(), shuffled.end(), r.rng());
  if (pick(shuffled) != got) return "choice depends on input order";
  return "";
}

// One random insert/invoke/delete/sweep sequence run against the worker
// cache and the reference model, compared after every step.
inline std::string CheckCacheSequence(uint64_t seed, int steps) {
  RandomValues r(seed);
  const uint64_t threshold = static_cast<uint64_t>(r.Int(50, 400));
  const int64_t ttl = 45 * 60 * 1000;
  ManualClock clock(1'000'000);
  worker::ModuleCache cache(threshold, ttl, clock);
  CacheModel model(threshold, ttl);

  std::vector<FunctionId> ids;
  int nids = r.Int(2, 10);
  for (int i = 0; i < nids; ++i) ids.push_back({"m", "f" + std::to_string(i)});

  auto size_for = [&] {
    if (r.Int(0, 19) == 0) return threshold + static_cast<uint64_t>(r.Int(1, 50));
    if (r.Int(0, 9) == 0) return threshold;
    return static_cast<uint64_t>(r.Int(1, static_cast<int>(threshold * 3 / 5)));
  };
  auto fail = [&](int step, const std::string& what) {
    return "seed " + std::to_string(seed) + " step " + std::to_string(step) + ": " + what;
  };

  for (int step = 0; step < steps; ++step) {
    switch (r.Int(0, 9)) {
      case 0: {
        // Around the TTL boundary on purpose.
        int64_t adv = r.Coin() ? ttl + r.Int(-2, 2) * 60'000 : ttl + r.Int(-1, 1);
        clock.Advance(adv);
        model.Sweep(clock.NowMs());  // keep the model honest about a sweep below
        cache.Sweep();
        break;
      }
      case 1:
      case 2:
        clock.Advance(r.Coin() ? r.Int(0, 3) : r.Int(0, 20 * 60'000));
        break;
      case 3:
      case 4: {
        const FunctionId& id = ids[static_cast<size_t>(r.Int(0, nids - 1))];
        uint64_t size = size_for();
        auto got = cache.Insert(id, nullptr, size, 64);
        auto want = model.Insert(id, size, clock.NowMs());
        if (got.admitted != (size <= threshold)) return fail(step, "admission mismatch");
        if (got.evicted != want) return fail(step, "eviction order mismatch on insert");
        break;
      }
      case 5:
      case 6:
      case 7: {
        // Invoke: hit refreshes, miss goes through the cold path and inserts.
        const FunctionId& id = ids[static_cast<size_t>(r.Int(0, nids - 1))];
        bool hit = cache.Lookup(id).has_value();
        if (hit != model.Touch(id, clock.NowMs())) return fail(step, "hit/miss mismatch for " + id.ToString());
        if (!hit) {
          uint64_t size = size_for();
          auto got = cache.Insert(id, nullptr, size, 64);
          if (got.evicted != model.Insert(id, size, clock.NowMs())) return fail(step, "eviction mismatch on cold path");
        }
        break;
      }
      case 8: {
        const FunctionId& id = ids[static_cast<size_t>(r.Int(0, nids - 1))];
        if (cache.Erase(id) != model.Remove(id)) return fail(step, "erase mismatch");
        break;
      }
      default: {
        auto got = cache.Sweep();
        if (got != model.Sweep(clock.NowMs())) return fail(step, "sweep mismatch");
      }
    }

    auto snap = cache.Snapshot();
    std::sort(snap.begin(), snap.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    auto want = model.Sorted();
    if (snap.size() != want.size()) return fail(step, "size mismatch");
    for (size_t i = 0; i < snap.size(); ++i) {
      if (snap[i].id != want[i].id || snap[i].byte_size != want[i].size || snap[i].last_activity != want[i].last) {
        return fail(step, "entry mismatch at " + want[i].id.ToString());
      }
    }
    if (cache.total_bytes() != model.Total()) return fail(step, "byte total mismatch");
    if (cache.total_bytes() > threshold) return fail(step, "over threshold");
  }
  return "";
}

}  // namespace fl::testing
