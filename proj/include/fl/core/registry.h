#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fl/common/clock.h"
#include "fl/core/scheduler.h"
#include "fl/protocol/types.h"

namespace fl::core {

// Core-side view of the workers plus the reservations of invocations in
// flight. Every method is atomic with respect to the others.
class WorkerRegistry {
 public:
  WorkerRegistry(const Clock& clock, int64_t liveness_timeout_ms);

  // Adds or refreshes a worker from its hello. An older epoch than the one
  // on record is refused (returns false).
  bool Register(const DiscoveryAnnounce& announce);
  void SetConnected(const WorkerId& id, bool connected);
  void Remove(const WorkerId& id);

  // Returns the epoch on record, if any.
  std::optional<uint64_t> KnownEpoch(const WorkerId& id) const;

  // Replaces last_sample iff newer. Unknown workers are ignored (false).
  bool IngestHeartbeat(const MetricsSample& s);

  // Picks a live, connected worker for `required_mb` and books the
  // reservation under `cid`. Throws Error(kNoWorkerAvailable).
  WorkerId Reserve(const CorrelationId& cid, uint32_t required_mb);
  void Release(const CorrelationId& cid);

  bool IsLive(const WorkerRecord& w, int64_t now) const;
  // Records with pending_reservations_mb filled in, sorted by worker_id.
  std::vector<WorkerRecord> Snapshot() const;
  std::optional<WorkerRecord> Find(const WorkerId& id) const;

 private:
  struct Reservation {
    WorkerId worker;
    uint32_t mb = 0;
    int64_t dispatched_at = 0;
  };

  uint64_t PendingLocked(const WorkerRecord& w) const;

  const Clock& clock_;
  const int64_t liveness_timeout_ms_;
  mutable std::mutex mu_;
  std::map<WorkerId, WorkerRecord> workers_;
  std::unordered_map<CorrelationId, Reservation, Id128Hash> reservations_;
};

}  // namespace fl::core
