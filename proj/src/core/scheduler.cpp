#include "fl/core/scheduler.h"

#include "fl/common/error.h"

namespace fl::core {

const WorkerRecord& SelectWorker(std::span<const WorkerRecord> workers, uint64_t required_mb) {
  const WorkerRecord* best = nullptr;
  uint64_t best_free = 0;
  for (const auto& w : workers) {
    uint64_t free = EffectiveFree(w);
    if (free < required_mb) continue;
    if (!best || free > best_free || (free == best_free && w.worker_id < best->worker_id)) {
      best = &w;
      best_free = free;
    }
  }
  if (!best) {
    throw Error(ErrorCode::kNoWorkerAvailable,
                "no worker has " + std::to_string(required_mb) + " MiB free");
  }
  return *best;
}

}  // namespace fl::core
