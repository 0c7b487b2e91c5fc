#include "fl/worker/module_cache.h"

#include <gtest/gtest.h>

#include "properties.h"

namespace fl::worker {
namespace {

const FunctionId kA{"m", "a"}, kB{"m", "b"}, kC{"m", "c"}, kD{"m", "d"};

std::vector<FunctionId> Ids(const ModuleCache& c) {
  std::vector<FunctionId> out;
  for (const auto& e : c.Snapshot()) out.push_back(e.id);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(ModuleCache, EvictsLongestInactive) {
  ManualClock clock(1);
  ModuleCache c(100, 45 * 60'000, clock);
  c.Insert(kA, nullptr, 40, 1);
  clock.Set(2);
  c.Insert(kB, nullptr, 40, 1);
  clock.Set(3);
  auto r = c.Insert(kC, nullptr, 40, 1);
  EXPECT_TRUE(r.admitted);
  EXPECT_EQ(r.evicted, std::vector<FunctionId>{kA});
  EXPECT_EQ(Ids(c), (std::vector<FunctionId>{kB, kC}));
}

TEST(ModuleCache, OversizeEntryRefused) {
  ManualClock clock(1);
  ModuleCache c(100, 45 * 60'000, clock);
  auto r = c.Insert(kA, nullptr, 120, 1);
  EXPECT_FALSE(r.admitted);
  EXPECT_EQ(c.size(), 0u);
  EXPECT_FALSE(c.Lookup(kA));
  // A stale smaller entry for the same id goes away too.
  c.Insert(kB, nullptr, 10, 1);
  c.Insert(kB, nullptr, 101, 1);
  EXPECT_FALSE(c.Contains(kB));
  EXPECT_EQ(c.total_bytes(), 0u);
}

TEST(ModuleCache, UseRefreshesActivity) {
  ManualClock clock(1);
  ModuleCache c(100, 45 * 60'000, clock);
  c.Insert(kA, nullptr, 30, 1);
  clock.Set(2);
  c.Insert(kB, nullptr, 30, 1);
  clock.Set(3);
  c.Insert(kC, nullptr, 30, 1);
  clock.Set(4);
  ASSERT_TRUE(c.Lookup(kA));
  clock.Set(5);
  auto r = c.Insert(kD, nullptr, 30, 1);
  EXPECT_EQ(r.evicted, std::vector<FunctionId>{kB});
}

TEST(ModuleCache, TieBreakSmallerId) {
  ManualClock clock(7);
  ModuleCache c(100, 45 * 60'000, clock);
  c.Insert(kB, nullptr, 40, 1);
  c.Insert(kA, nullptr, 40, 1);
  auto r = c.Insert(kC, nullptr, 40, 1);
  EXPECT_EQ(r.evicted, std::vector<FunctionId>{kA});
}

TEST(ModuleCache, TtlIsStrict) {
  const int64_t min = 60'000;
  ManualClock clock(0);
  ModuleCache c(100, 45 * min, clock);
  c.Insert(kA, nullptr, 10, 1);
  clock.Set(44 * min);
  EXPECT_TRUE(c.Sweep().empty());
  clock.Set(45 * min);
  EXPECT_TRUE(c.Sweep().empty());
  clock.Set(45 * min + 1);
  EXPECT_EQ(c.Sweep(), std::vector<FunctionId>{kA});

  c.Insert(kB, nullptr, 10, 1);
  clock.Advance(46 * min);
  EXPECT_EQ(c.Sweep(), std::vector<FunctionId>{kB});
}

TEST(ModuleCache, ReplaceKeepsOneEntry) {
  ManualClock clock(0);
  ModuleCache c(100, 1000, clock);
  c.Insert(kA, nullptr, 10, 1);
  c.Insert(kA, nullptr, 20, 2);
  EXPECT_EQ(c.size(), 1u);
  EXPECT_EQ(c.total_bytes(), 20u);
  EXPECT_EQ(c.Lookup(kA)->reserved_memory_mb, 2u);
}

TEST(ModuleCache, RandomSequencesMatchModel) {
  for (uint64_t seed = 1; seed <= 200; ++seed) {
    ASSERT_EQ(testing::CheckCacheSequence(seed, 60), "");
  }
}

}  // namespace
}  // namespace fl::worker
