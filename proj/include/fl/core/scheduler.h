#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "fl/protocol/types.h"

namespace fl::core {

struct WorkerRecord {
  WorkerId worker_id;
  std::string address;
  uint32_t capacity_mb = 0;
  uint64_t epoch = 0;
  MetricsSample last_sample;
  int64_t last_seen = 0;
  uint64_t pending_reservations_mb = 0;
  bool connected = false;
};

inline uint64_t EffectiveFree(const WorkerRecord& w) {
  uint64_t free = w.last_sample.free_memory_mb;
  return free > w.pending_reservations_mb ? free - w.pending_reservations_mb : 0;
}

// Largest effective_free among records with effective_free >= required_mb;
// ties go to the smallest worker_id. Caller filters out dead workers.
// Throws Error(kNoWorkerAvailable).
const WorkerRecord& SelectWorker(std::span<const WorkerRecord> workers, uint64_t required_mb);

}  // namespace fl::core
