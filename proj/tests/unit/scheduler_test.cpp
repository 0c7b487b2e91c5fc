#include "fl/core/scheduler.h"

#include <gtest/gtest.h>

#include "fl/core/registry.h"
#include "properties.h"
#include "test_util.h"

namespace fl::core {
namespace {

using testing::CodeOf;

WorkerId Wid(uint8_t b) {
  WorkerId id;
  id.bytes.fill(0);
  id.bytes[15] = b;
  return id;
}

WorkerRecord Rec(uint8_t id, uint64_t free) {
  WorkerRecord w;
  w.worker_id = Wid(id);
  w.capacity_mb = 4096;
  w.last_sample.free_memory_mb = free;
  return w;
}

TEST(SelectWorker, LargestFreeWins) {
  std::vector<WorkerRecord> ws{Rec(1, 512), Rec(2, 1024), Rec(3, 256)};
  EXPECT_EQ(SelectWorker(ws, 300).worker_id, Wid(2));
  EXPECT_EQ(CodeOf([&] { SelectWorker(ws, 2048); }), ErrorCode::kNoWorkerAvailable);
}

TEST(SelectWorker, TieGoesToSmallestId) {
  std::vector<WorkerRecord> ws{Rec(0xb, 512), Rec(0xa, 512)};
  EXPECT_EQ(SelectWorker(ws, 100).worker_id, Wid(0xa));
}

TEST(SelectWorker, PendingReservationsCount) {
  std::vector<WorkerRecord> ws{Rec(1, 512), Rec(2, 1024)};
  ws[1].pending_reservations_mb = 800;
  EXPECT_EQ(SelectWorker(ws, 300).worker_id, Wid(1));
  EXPECT_EQ(SelectWorker(ws, 512).worker_id, Wid(1));
  EXPECT_EQ(CodeOf([&] { SelectWorker(ws, 513); }), ErrorCode::kNoWorkerAvailable);
  EXPECT_EQ(CodeOf([&] { SelectWorker(std::vector<WorkerRecord>{}, 0); }), ErrorCode::kNoWorkerAvailable);
}

TEST(SelectWorker, RandomSets) {
  testing::RandomValues r(4242);
  for (int i = 0; i < 2000; ++i) {
    std::string err = testing::CheckSchedulerSet(r);
    ASSERT_EQ(err, "") << "set " << i;
  }
}

class RegistryTest : public ::testing::Test {
 protected:
  RegistryTest() : clock_(1'000'000), reg_(clock_, 15'000) {}

  void Add(uint8_t id, uint32_t cap, uint64_t free) {
    ASSERT_TRUE(reg_.Register({Wid(id), "127.0.0.1:1", cap, 1}));
    reg_.SetConnected(Wid(id), true);
    ASSERT_TRUE(reg_.IngestHeartbeat({Wid(id), free, 0, 0, clock_.NowMs()}));
  }

  ManualClock clock_;
  WorkerRegistry reg_;
};

TEST_F(RegistryTest, OutOfOrderHeartbeatKeepsNewest) {
  Add(1, 1024, 100);
  reg_.IngestHeartbeat({Wid(1), 700, 0, 0, clock_.NowMs() + 10});
  reg_.IngestHeartbeat({Wid(1), 300, 0, 0, clock_.NowMs() + 5});
  auto w = reg_.Find(Wid(1));
  ASSERT_TRUE(w);
  EXPECT_EQ(w->last_sample.free_memory_mb, 700u);
  EXPECT_EQ(w->last_sample.taken_at, clock_.NowMs() + 10);
}

TEST_F(RegistryTest, UnknownWorkerIgnored) {
  Add(1, 1024, 100);
  auto before = reg_.Snapshot();
  EXPECT_FALSE(reg_.IngestHeartbeat({Wid(9), 700, 0, 0, clock_.NowMs() + 10}));
  auto after = reg_.Snapshot();
  ASSERT_EQ(after.size(), before.size());
  EXPECT_EQ(after[0].last_sample, before[0].last_sample);
}

TEST_F(RegistryTest, FreeMemoryClampedToCapacity) {
  Add(1, 512, 9999);
  EXPECT_EQ(reg_.Find(Wid(1))->last_sample.free_memory_mb, 512u);
}

TEST_F(RegistryTest, SilenceExcludesWorker) {
  Add(1, 1024, 1000);
  Add(2, 1024, 500);
  clock_.Advance(10'000);
  reg_.IngestHeartbeat({Wid(2), 500, 0, 0, clock_.NowMs()});
  clock_.Advance(5'000);  // w1 silent for exactly the timeout: still live
  EXPECT_EQ(reg_.Reserve(CorrelationId::Random(), 10), Wid(1));
  clock_.Advance(1);
  EXPECT_EQ(reg_.Reserve(CorrelationId::Random(), 10), Wid(2));
  clock_.Advance(15'000);
  EXPECT_EQ(CodeOf([&] { reg_.Reserve(CorrelationId::Random(), 10); }), ErrorCode::kNoWorkerAvailable);
}

TEST_F(RegistryTest, DisconnectedWorkerNotChosen) {
  Add(1, 1024, 1000);
  Add(2, 1024, 500);
  reg_.SetConnected(Wid(1), false);
  EXPECT_EQ(reg_.Reserve(CorrelationId::Random(), 10), Wid(2));
}

TEST_F(RegistryTest, ReservationsUntilNextSample) {
  Add(1, 1024, 1000);
  Add(2, 1024, 800);
  auto c1 = CorrelationId::Random();
  EXPECT_EQ(reg_.Reserve(c1, 300), Wid(1));  // w1 effective 700 now
  EXPECT_EQ(reg_.Reserve(CorrelationId::Random(), 300), Wid(2));
  EXPECT_EQ(reg_.Find(Wid(1))->pending_reservations_mb, 300u);
  reg_.Release(c1);
  EXPECT_EQ(reg_.Find(Wid(1))->pending_reservations_mb, 0u);

  // A reservation taken before the newest sample is assumed reflected in it.
  auto c2 = CorrelationId::Random();
  EXPECT_EQ(reg_.Reserve(c2, 100), Wid(1));
  clock_.Advance(1);
  reg_.IngestHeartbeat({Wid(1), 900, 1, 0, clock_.NowMs()});
  EXPECT_EQ(reg_.Find(Wid(1))->pending_reservations_mb, 0u);
}

TEST_F(RegistryTest, EpochRules) {
  Add(1, 1024, 1000);
  EXPECT_FALSE(reg_.Register({Wid(1), "127.0.0.1:2", 1024, 0}));
  EXPECT_EQ(reg_.KnownEpoch(Wid(1)), 1u);
  EXPECT_TRUE(reg_.Register({Wid(1), "127.0.0.1:3", 1024, 2}));
  auto w = reg_.Find(Wid(1));
  EXPECT_EQ(w->epoch, 2u);
  EXPECT_EQ(w->address, "127.0.0.1:3");
  // New incarnation: nothing known until it reports.
  EXPECT_EQ(w->last_sample.free_memory_mb, 0u);
  EXPECT_FALSE(reg_.KnownEpoch(Wid(7)));
}

}  // namespace
}  // namespace fl::core
