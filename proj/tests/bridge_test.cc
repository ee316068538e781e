#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "petastore/catalog/bridge.h"
#include "test_util.h"

namespace petastore::catalog {
namespace {

FederationId F(const std::string& run, DataClass dc = DataClass::kReal) {
  return *FederationId::make(run, dc);
}

class BridgeTest : public ::testing::Test {
 protected:
  BridgeTest() : locks_(clock_), bridge_(locks_, clock_) {}

  std::vector<EventHeader> events(std::size_t n) {
    std::vector<EventHeader> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(testing_util::random_header(rng_));
    return out;
  }

  ManualClock clock_;
  locks::LockService locks_;
  Bridge bridge_;
  std::mt19937_64 rng_{23};
};

TEST_F(BridgeTest, SixFederationsForThreeRuns) {
  for (const char* run : {"run1", "run2", "run3"}) {
    for (auto dc : {DataClass::kReal, DataClass::kSim}) {
      ASSERT_TRUE(bridge_.register_federation({F(run, dc)}).ok());
    }
  }
  EXPECT_EQ(bridge_.federations().size(), 6u);
  for (const auto& d : bridge_.federations()) EXPECT_EQ(d.status, FederationStatus::kOnline);
  EXPECT_EQ(bridge_.register_federation({F("run2", DataClass::kSim)}).code(),
            ErrorCode::kDuplicateFederation);
  ASSERT_TRUE(bridge_.bind_collection("/r2/x", F("run2", DataClass::kSim), CollectionKind::kStream).ok());
  EXPECT_EQ(bridge_.resolve("/r2/x")->federation, F("run2", DataClass::kSim));
}

TEST_F(BridgeTest, BindAndResolve) {
  ASSERT_TRUE(bridge_.register_federation({F("run3")}).ok());
  ASSERT_TRUE(bridge_.register_federation({F("run1")}).ok());
  ASSERT_TRUE(bridge_.bind_collection("/r3/stream/A", F("run3"), CollectionKind::kStream).ok());
  auto r = bridge_.resolve("/r3/stream/A");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->federation, F("run3"));
  EXPECT_EQ(r->kind, CollectionKind::kStream);
  EXPECT_EQ(bridge_.bind_collection("/r3/stream/A", F("run1"), CollectionKind::kStream).code(),
            ErrorCode::kDuplicatePath);
  EXPECT_EQ(bridge_.resolve("/r3/stream/A")->federation, F("run3"));
  EXPECT_EQ(bridge_.bind_collection("/r9/x", F("run9"), CollectionKind::kStream).code(),
            ErrorCode::kUnknownFederation);
  EXPECT_EQ(bridge_.resolve("/nowhere").code(), ErrorCode::kNotFound);
}

TEST_F(BridgeTest, ProductionShapePerRunAllResolvable) {
  for (int run = 1; run <= 3; ++run) {
    const auto fed = F("run" + std::to_string(run));
    ASSERT_TRUE(bridge_.register_federation({fed}).ok());
    for (int s = 0; s < 4; ++s) {
      ASSERT_TRUE(bridge_.bind_collection("/r" + std::to_string(run) + "/stream/" + std::to_string(s),
                                          fed, CollectionKind::kStream).ok());
    }
    for (int k = 0; k < 115; ++k) {
      ASSERT_TRUE(bridge_.bind_collection("/r" + std::to_string(run) + "/skim/" + std::to_string(k),
                                          fed, CollectionKind::kSkim).ok());
    }
  }
  EXPECT_EQ(bridge_.binding_count(), 3u * 119u);
  for (const auto& e : bridge_.entries()) {
    auto r = bridge_.resolve(e.path);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(*r, e);
    EXPECT_EQ(e.federation.run_label, "run" + e.path.substr(2, 1));
  }
}

TEST_F(BridgeTest, OfflineFederation) {
  ASSERT_TRUE(bridge_.register_federation({F("run1")}).ok());
  ASSERT_TRUE(bridge_.bind_collection("/a", F("run1"), CollectionKind::kStream).ok());
  ASSERT_TRUE(bridge_.set_federation_status(F("run1"), FederationStatus::kOffline).ok());
  EXPECT_EQ(bridge_.resolve("/a").code(), ErrorCode::kFederationOffline);
  ASSERT_TRUE(bridge_.set_federation_status(F("run1"), FederationStatus::kOnline).ok());
  EXPECT_TRUE(bridge_.resolve("/a").ok());
  EXPECT_EQ(bridge_.set_federation_status(F("zz"), FederationStatus::kOnline).code(),
            ErrorCode::kUnknownFederation);
}

TEST_F(BridgeTest, HundredThousandBindingsMatchScan) {
  std::vector<FederationId> feds;
  for (int i = 0; i < 6; ++i) {
    feds.push_back(F("run" + std::to_string(i / 2), i % 2 ? DataClass::kSim : DataClass::kReal));
    ASSERT_TRUE(bridge_.register_federation({feds.back()}).ok());
  }
  std::vector<BridgeEntry> all;
  for (int i = 0; i < 100'000; ++i) {
    BridgeEntry e{"/c/" + std::to_string(rng_() % 1000) + "/" + std::to_string(i),
                  feds[rng_() % feds.size()],
                  rng_() % 2 ? CollectionKind::kSkim : CollectionKind::kStream};
    ASSERT_TRUE(bridge_.bind_collection(e.path, e.federation, e.kind).ok());
    all.push_back(e);
  }
  for (int probe = 0; probe < 300; ++probe) {
    const std::string path = all[rng_() % all.size()].path;
    const BridgeEntry* scanned = nullptr;
    for (const auto& e : all) {
      if (e.path == path) scanned = &e;
    }
    auto r = bridge_.resolve(path);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(*r, *scanned);
  }
  EXPECT_EQ(bridge_.entries().size(), all.size());
}

TEST_F(BridgeTest, DeepCopyStream) {
  ASSERT_TRUE(bridge_.register_federation({F("run1")}).ok());
  ASSERT_TRUE(bridge_.register_federation({F("export")}).ok());
  ASSERT_TRUE(bridge_.create_collection("/r1/s", F("run1"), CollectionKind::kStream).ok());
  auto evs = events(100);
  ASSERT_TRUE(bridge_.store(F("run1"))->append_events("/r1/s", evs).ok());
  auto copy = bridge_.deep_copy("/r1/s", F("export"));
  ASSERT_TRUE(copy.ok()) << copy.error().to_string();
  EXPECT_EQ(*copy, "/r1/s@export:REAL");
  auto r = bridge_.resolve(*copy);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->federation, F("export"));
  EXPECT_EQ(r->kind, CollectionKind::kStream);
  EXPECT_EQ(*bridge_.read_collection(*copy), evs);
  EXPECT_EQ(bridge_.deep_copy("/r1/s", F("export")).code(), ErrorCode::kDuplicatePath);
}

TEST_F(BridgeTest, DeepCopySkimMaterializesInOrder) {
  ASSERT_TRUE(bridge_.register_federation({F("run1")}).ok());
  ASSERT_TRUE(bridge_.register_federation({F("export")}).ok());
  ASSERT_TRUE(bridge_.create_collection("/r1/s", F("run1"), CollectionKind::kStream).ok());
  auto evs = events(10);
  ASSERT_TRUE(bridge_.store(F("run1"))->append_events("/r1/s", evs).ok());
  ASSERT_TRUE(bridge_.create_skim("/r1/k", F("run1"), "/r1/s", {2, 5, 7}).ok());
  auto copy = bridge_.deep_copy("/r1/k", F("export"));
  ASSERT_TRUE(copy.ok());
  auto* target = bridge_.store(F("export"));
  auto info = target->info(*copy);
  ASSERT_TRUE(info.ok());
  EXPECT_EQ(info->kind, CollectionKind::kStream);
  EXPECT_EQ(*target->read_collection(*copy), (std::vector<EventHeader>{evs[2], evs[5], evs[7]}));
  EXPECT_TRUE(target->check_self_contained().ok());
}

TEST_F(BridgeTest, DanglingSkimLeavesTargetUnchanged) {
  ASSERT_TRUE(bridge_.register_federation({F("run1")}).ok());
  ASSERT_TRUE(bridge_.register_federation({F("export")}).ok());
  ASSERT_TRUE(bridge_.create_collection("/r1/s", F("run1"), CollectionKind::kStream).ok());
  ASSERT_TRUE(bridge_.store(F("run1"))->append_events("/r1/s", events(5)).ok());
  ASSERT_TRUE(bridge_.store(F("run1"))->create_skim_unchecked("/r1/bad", "/r1/s", {1, 5}).ok());
  ASSERT_TRUE(bridge_.bind_collection("/r1/bad", F("run1"), CollectionKind::kSkim).ok());
  const auto before = bridge_.entries();
  EXPECT_EQ(bridge_.deep_copy("/r1/bad", F("export")).code(), ErrorCode::kDanglingPointer);
  EXPECT_EQ(bridge_.entries(), before);
  EXPECT_EQ(bridge_.store(F("export"))->collection_count(), 0u);
}

TEST_F(BridgeTest, DeepCopyErrors) {
  ASSERT_TRUE(bridge_.register_federation({F("run1")}).ok());
  ASSERT_TRUE(bridge_.register_federation({F("export")}).ok());
  ASSERT_TRUE(bridge_.create_collection("/r1/s", F("run1"), CollectionKind::kStream).ok());
  EXPECT_EQ(bridge_.deep_copy("/missing", F("export")).code(), ErrorCode::kNotFound);
  ASSERT_TRUE(bridge_.set_federation_status(F("export"), FederationStatus::kOffline).ok());
  EXPECT_EQ(bridge_.deep_copy("/r1/s", F("export")).code(), ErrorCode::kFederationOffline);
  ASSERT_TRUE(bridge_.set_federation_status(F("export"), FederationStatus::kOnline).ok());
  ASSERT_TRUE(bridge_.set_federation_status(F("run1"), FederationStatus::kOffline).ok());
  EXPECT_EQ(bridge_.deep_copy("/r1/s", F("export")).code(), ErrorCode::kFederationOffline);
  EXPECT_EQ(bridge_.store(F("export"))->collection_count(), 0u);
}

TEST_F(BridgeTest, RandomDeepCopiesMatchDereferenceOracle) {
  ASSERT_TRUE(bridge_.register_federation({F("run1")}).ok());
  ASSERT_TRUE(bridge_.register_federation({F("export")}).ok());
  std::map<std::string, std::vector<EventHeader>> streams;
  for (int i = 0; i < 5; ++i) {
    const std::string p = "/r1/stream/" + std::to_string(i);
    ASSERT_TRUE(bridge_.create_collection(p, F("run1"), CollectionKind::kStream).ok());
    streams[p] = events(40);
    ASSERT_TRUE(bridge_.store(F("run1"))->append_events(p, streams[p]).ok());
  }
  for (int k = 0; k < 40; ++k) {
    const std::string src = "/r1/stream/" + std::to_string(rng_() % 5);
    std::vector<std::uint64_t> ords;
    for (std::uint64_t o = 0; o < 40; ++o) {
      if (rng_() % 4 == 0) ords.push_back(o);
    }
    const std::string skim = "/r1/skim/" + std::to_string(k);
    ASSERT_TRUE(bridge_.create_skim(skim, F("run1"), src, ords).ok());
    auto copy = bridge_.deep_copy(skim, F("export"));
    ASSERT_TRUE(copy.ok());
    std::vector<EventHeader> oracle;
    for (auto o : ords) oracle.push_back(streams[src][o]);
    EXPECT_EQ(*bridge_.read_collection(*copy), oracle);
  }
  EXPECT_TRUE(bridge_.store(F("export"))->check_self_contained().ok());
}

TEST_F(BridgeTest, ResolveDuringDeepCopySeesAllOrNothing) {
  ASSERT_TRUE(bridge_.register_federation({F("run1")}).ok());
  ASSERT_TRUE(bridge_.register_federation({F("export")}).ok());
  ASSERT_TRUE(bridge_.create_collection("/r1/s", F("run1"), CollectionKind::kStream).ok());
  const auto evs = events(20'000);
  ASSERT_TRUE(bridge_.store(F("run1"))->append_events("/r1/s", evs).ok());
  const std::string target = Bridge::deep_copy_path("/r1/s", F("export"));
  std::atomic<bool> done{false};
  std::atomic<int> partial{0};
  std::thread reader([&] {
    while (!done) {
      auto r = bridge_.resolve(target);
      if (!r.ok()) {
        if (r.code() != ErrorCode::kNotFound) ++partial;
        continue;
      }
      auto* st = bridge_.store(F("export"));
      auto info = st->info(target);
      if (!info.ok() || info->size != evs.size()) ++partial;
    }
  });
  ASSERT_TRUE(bridge_.deep_copy("/r1/s", F("export")).ok());
  done = true;
  reader.join();
  EXPECT_EQ(partial.load(), 0);
}

class BridgePersistenceTest : public BridgeTest {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("petastore_bridge_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(BridgePersistenceTest, ReopenRestoresBindingsStatusAndData) {
  const auto evs = events(12);
  {
    auto b = Bridge::open(dir_, locks_, clock_);
    ASSERT_TRUE(b.ok()) << b.error().to_string();
    ASSERT_TRUE((*b)->register_federation({F("run1")}).ok());
    ASSERT_TRUE((*b)->register_federation({F("run1", DataClass::kSim)}).ok());
    ASSERT_TRUE((*b)->create_collection("/r1/s", F("run1"), CollectionKind::kStream).ok());
    ASSERT_TRUE((*b)->store(F("run1"))->append_events("/r1/s", evs).ok());
    ASSERT_TRUE((*b)->create_skim("/r1/k", F("run1"), "/r1/s", {0, 11}).ok());
    ASSERT_TRUE((*b)->deep_copy("/r1/k", F("run1", DataClass::kSim)).ok());
    ASSERT_TRUE((*b)->set_federation_status(F("run1"), FederationStatus::kOffline).ok());
  }
  std::ifstream map(dir_ / "bridge.map");
  std::string first;
  std::getline(map, first);
  EXPECT_EQ(first, "/r1/s\trun1:REAL\tSTREAM");

  auto b = Bridge::open(dir_, locks_, clock_);
  ASSERT_TRUE(b.ok()) << b.error().to_string();
  EXPECT_EQ((*b)->binding_count(), 3u);
  EXPECT_EQ((*b)->resolve("/r1/s").code(), ErrorCode::kFederationOffline);
  auto copy = (*b)->read_collection("/r1/k@run1:SIM");
  ASSERT_TRUE(copy.ok());
  EXPECT_EQ(*copy, (std::vector<EventHeader>{evs[0], evs[11]}));
}

}  // namespace
}  // namespace petastore::catalog
