#include "fl/core/registry.h"

#include <spdlog/spdlog.h>

#include "fl/common/error.h"

namespace fl::core {

WorkerRegistry::WorkerRegistry(const Clock& clock, int64_t liveness_timeout_ms)
    : clock_(clock), liveness_timeout_ms_(liveness_timeout_ms) {}

bool WorkerRegistry::Register(const DiscoveryAnnounce& a) {
  std::lock_guard lock(mu_);
  auto it = workers_.find(a.worker_id);
  if (it != workers_.end() && a.epoch < it->second.epoch) return false;
  WorkerRecord& w = workers_[a.worker_id];
  bool restarted = it != workers_.end() && a.epoch > w.epoch;
  w.worker_id = a.worker_id;
  w.address = a.listen_address;
  w.capacity_mb = a.capacity_mb;
  w.epoch = a.epoch;
  w.last_seen = clock_.NowMs();
  if (it == workers_.end() || restarted) {
    // Nothing known about the new incarnation until its first heartbeat.
    w.last_sample = MetricsSample{a.worker_id, 0, 0, 0, 0};
  }
  return true;
}

void WorkerRegistry::SetConnected(const WorkerId& id, bool connected) {
  std::lock_guard lock(mu_);
  if (auto it = workers_.find(id); it != workers_.end()) it->second.connected = connected;
}

void WorkerRegistry::Remove(const WorkerId& id) {
  std::lock_guard lock(mu_);
  workers_.erase(id);
}

std::optional<uint64_t> WorkerRegistry::KnownEpoch(const WorkerId& id) const {
  std::lock_guard lock(mu_);
  auto it = workers_.find(id);
  if (it == workers_.end()) return std::nullopt;
  return it->second.epoch;
}

bool WorkerRegistry::IngestHeartbeat(const MetricsSample& s) {
  std::lock_guard lock(mu_);
  auto it = workers_.find(s.worker_id);
  if (it == workers_.end()) {
    spdlog::debug("heartbeat from unknown worker {}", s.worker_id.ToHex());
    return false;
  }
  WorkerRecord& w = it->second;
  w.last_seen = clock_.NowMs();
  if (s.taken_at <= w.last_sample.taken_at) return true;
  w.last_sample = s;
  if (w.last_sample.free_memory_mb > w.capacity_mb) w.last_sample.free_memory_mb = w.capacity_mb;
  return true;
}

bool WorkerRegistry::IsLive(const WorkerRecord& w, int64_t now) const {
  return now - w.last_seen <= liveness_timeout_ms_;
}

uint64_t WorkerRegistry::PendingLocked(const WorkerRecord& w) const {
  uint64_t sum = 0;
  for (const auto& [cid, r] : reservations_) {
    if (r.worker == w.worker_id && r.dispatched_at >= w.last_sample.taken_at) sum += r.mb;
  }
  return sum;
}

WorkerId WorkerRegistry::Reserve(const CorrelationId& cid, uint32_t required_mb) {
  std::lock_guard lock(mu_);
  int64_t now = clock_.NowMs();
  std::vector<WorkerRecord> candidates;
  for (const auto& [id, w] : workers_) {
    if (!w.connected || !IsLive(w, now)) continue;
    WorkerRecord c = w;
    c.pending_reservations_mb = PendingLocked(w);
    candidates.push_back(std::move(c));
  }
  WorkerId chosen = SelectWorker(candidates, required_mb).worker_id;
  reservations_[cid] = Reservation{chosen, required_mb, now};
  return chosen;
}

void WorkerRegistry::Release(const CorrelationId& cid) {
  std::lock_guard lock(mu_);
  reservations_.erase(cid);
}

std::vector<WorkerRecord> WorkerRegistry::Snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<WorkerRecord> out;
  for (const auto& [id, w] : workers_) {
    WorkerRecord c = w;
    c.pending_reservations_mb = PendingLocked(w);
    out.push_back(std::move(c));
  }
  return out;
}

std::optional<WorkerRecord> WorkerRegistry::Find(const WorkerId& id) const {
  std::lock_guard lock(mu_);
  auto it = workers_.find(id);
  if (it == workers_.end()) return std::nullopt;
  WorkerRecord c = it->second;
  c.pending_reservations_mb = PendingLocked(c);
  return c;
}

}  // namespace fl::core
