#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fl/common/clock.h"
#include "fl/protocol/types.h"
#include "fl/wasm/module.h"

namespace fl::worker {

struct CacheEntry {
  FunctionId id;
  std::shared_ptr<const wasm::CompiledModule> compiled;
  uint64_t byte_size = 0;
  uint32_t reserved_memory_mb = 0;
  int64_t last_activity = 0;
  int64_t inserted_at = 0;
};

// Compiled-module cache bounded by total artifact bytes. Over the threshold,
// the entry idle the longest goes first (ties: smaller FunctionId); entries
// idle for more than ttl_ms are dropped by Sweep().
class ModuleCache {
 public:
  ModuleCache(uint64_t threshold_bytes, int64_t ttl_ms, const Clock& clock);

  struct InsertResult {
    bool admitted = false;
    std::vector<FunctionId> evicted;  // in eviction order
  };

  // Replaces any entry for the id. An entry larger than the whole threshold
  // is refused; the id's previous entry (stale code) is still removed.
  InsertResult Insert(const FunctionId& id, std::shared_ptr<const wasm::CompiledModule> compiled,
                      uint64_t byte_size, uint32_t reserved_memory_mb);

  // Hit refreshes last_activity.
  std::optional<CacheEntry> Lookup(const FunctionId& id);

  bool Erase(const FunctionId& id);
  std::vector<FunctionId> Sweep();
  void Clear();

  bool Contains(const FunctionId& id) const;
  uint64_t total_bytes() const;
  size_t size() const;
  std::vector<CacheEntry> Snapshot() const;

  uint64_t threshold_bytes() const { return threshold_bytes_; }
  int64_t ttl_ms() const { return ttl_ms_; }

 private:
  std::vector<FunctionId> EvictOverThreshold(const FunctionId& keep);

  const uint64_t threshold_bytes_;
  const int64_t ttl_ms_;
  const Clock& clock_;
  mutable std::mutex mu_;
  std::unordered_map<FunctionId, CacheEntry, FunctionIdHash> entries_;
  uint64_t total_bytes_ = 0;
};

}  // namespace fl::worker
