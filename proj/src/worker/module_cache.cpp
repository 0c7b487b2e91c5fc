#include "fl/worker/module_cache.h"

#include <algorithm>

namespace fl::worker {

ModuleCache::ModuleCache(uint64_t threshold_bytes, int64_t ttl_ms, const Clock& clock)
    : threshold_bytes_(threshold_bytes), ttl_ms_(ttl_ms), clock_(clock) {}

ModuleCache::InsertResult ModuleCache::Insert(const FunctionId& id,
                                              std::shared_ptr<const wasm::CompiledModule> compiled,
                                              uint64_t byte_size, uint32_t reserved_memory_mb) {
  std::lock_guard lock(mu_);
  InsertResult result;
  if (auto it = entries_.find(id); it != entries_.end()) {
    total_bytes_ -= it->second.byte_size;
    entries_.erase(it);
  }
  if (byte_size > threshold_bytes_) return result;

  int64_t now = clock_.NowMs();
  entries_[id] = CacheEntry{id, std::move(compiled), byte_size, reserved_memory_mb, now, now};
  total_bytes_ += byte_size;
  result.admitted = true;
  result.evicted = EvictOverThreshold(id);
  return result;
}

std::vector<FunctionId> ModuleCache::EvictOverThreshold(const FunctionId& keep) {
  std::vector<FunctionId> evicted;
  while (total_bytes_ > threshold_bytes_) {
    const CacheEntry* victim = nullptr;
    for (const auto& [id, e] : entries_) {
      if (id == keep) continue;
      if (!victim || e.last_activity < victim->last_activity ||
          (e.last_activity == victim->last_activity && e.id < victim->id)) {
        victim = &e;
      }
    }
    if (!victim) break;
    evicted.push_back(victim->id);
    total_bytes_ -= victim->byte_size;
    entries_.erase(victim->id);
  }
  return evicted;
}

std::optional<CacheEntry> ModuleCache::Lookup(const FunctionId& id) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  it->second.last_activity = std::max(it->second.last_activity, clock_.NowMs());
  return it->second;
}

bool ModuleCache::Erase(const FunctionId& id) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return false;
  total_bytes_ -= it->second.byte_size;
  entries_.erase(it);
  return true;
}

std::vector<FunctionId> ModuleCache::Sweep() {
  std::lock_guard lock(mu_);
  int64_t now = clock_.NowMs();
  std::vector<FunctionId> expired;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (now - it->second.last_activity > ttl_ms_) {
      expired.push_back(it->first);
      total_bytes_ -= it->second.byte_size;
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
  std::sort(expired.begin(), expired.end());
  return expired;
}

void ModuleCache::Clear() {
  std::lock_guard lock(mu_);
  entries_.clear();
  total_bytes_ = 0;
}

bool ModuleCache::Contains(const FunctionId& id) const {
  std::lock_guard lock(mu_);
  return entries_.contains(id);
}

uint64_t ModuleCache::total_bytes() const {
  std::lock_guard lock(mu_);
  return total_bytes_;
}

size_t ModuleCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::vector<CacheEntry> ModuleCache::Snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<CacheEntry> out;
  out.reserve(entries_.size());
  for (const auto& [id, e] : entries_) out.push_back(e);
  std::sort(out.begin(), out.end(), [](const CacheEntry& a, const CacheEntry& b) { return a.id < b.id; });
  return out;
}

}  // namespace fl::worker
