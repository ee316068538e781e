#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "petastore/events/event_store.h"
#include "petastore/core/path.h"
#include "petastore/events/namespace_tree.h"
#include "test_util.h"

namespace petastore::events {
namespace {

FederationId fed() { return *FederationId::make("run1", DataClass::kReal); }

std::vector<EventHeader> make_events(std::mt19937_64& rng, std::size_t n) {
  std::vector<EventHeader> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing_util::random_header(rng));
  return out;
}

class EventStoreTest : public ::testing::Test {
 protected:
  EventStoreTest() : locks_(clock_) {}

  std::unique_ptr<EventStore> make(std::size_t node_limit = kDefaultNodeLimit) {
    EventStoreConfig cfg;
    cfg.node_limit = node_limit;
    cfg.lock_timeout = std::chrono::milliseconds(200);
    return std::make_unique<EventStore>(fed(), locks_, clock_, cfg);
  }

  ManualClock clock_;
  locks::LockService locks_;
  std::mt19937_64 rng_{17};
};

TEST_F(EventStoreTest, AppendExtendsOrdinalsDensely) {
  auto s = make();
  ASSERT_TRUE(s->create_collection("/r1/stream/A", CollectionKind::kStream).ok());
  auto first = make_events(rng_, 3);
  auto second = make_events(rng_, 2);
  EXPECT_EQ(*s->append_events("/r1/stream/A", first), 3u);
  EXPECT_EQ(*s->append_events("/r1/stream/A", second), 2u);
  auto all = s->read_collection("/r1/stream/A");
  ASSERT_TRUE(all.ok());
  ASSERT_EQ(all->size(), 5u);
  for (std::uint64_t o = 0; o < 5; ++o) {
    auto h = s->dereference({fed(), "/r1/stream/A", o});
    ASSERT_TRUE(h.ok());
    EXPECT_EQ(*h, o < 3 ? first[o] : second[o - 3]);
  }
  EXPECT_EQ(s->dereference({fed(), "/r1/stream/A", 5}).code(), ErrorCode::kDanglingPointer);
}

TEST_F(EventStoreTest, AppendToSkimIsWrongKind) {
  auto s = make();
  ASSERT_TRUE(s->create_collection("/src", CollectionKind::kStream).ok());
  ASSERT_TRUE(s->create_skim("/sk", "/src", {}).ok());
  EXPECT_EQ(s->append_events("/sk", make_events(rng_, 1)).code(), ErrorCode::kWrongKind);
  EXPECT_EQ(s->append_events("/nope", {}).code(), ErrorCode::kNotFound);
}

TEST_F(EventStoreTest, HundredThousandEventsRoundTrip) {
  auto s = make();
  ASSERT_TRUE(s->create_collection("/big", CollectionKind::kStream).ok());
  auto events = make_events(rng_, 100'000);
  for (std::size_t i = 0; i < events.size(); i += 10'000) {
    std::vector<EventHeader> chunk(events.begin() + i, events.begin() + i + 10'000);
    ASSERT_TRUE(s->append_events("/big", chunk).ok());
  }
  auto back = s->read_collection("/big");
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back, events);
}

TEST_F(EventStoreTest, DuplicatePathRejected) {
  auto s = make();
  ASSERT_TRUE(s->create_collection("/a/b", CollectionKind::kStream).ok());
  EXPECT_EQ(s->create_collection("/a/b", CollectionKind::kSkim).code(), ErrorCode::kDuplicatePath);
  // A collection may also act as a directory for deeper paths.
  EXPECT_TRUE(s->create_collection("/a/b/c", CollectionKind::kStream).ok());
  EXPECT_EQ(s->create_collection("/", CollectionKind::kStream).code(),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(s->create_collection("a/b", CollectionKind::kStream).code(),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(s->create_collection("/a//b", CollectionKind::kStream).code(),
            ErrorCode::kInvalidArgument);
}

TEST_F(EventStoreTest, TwelveThousandCollectionsAllListable) {
  auto s = make();
  std::set<std::string> expected;
  for (int node = 0; node < 100; ++node) {
    for (int k = 0; k < 120; ++k) {
      const std::string p = "/prod/node" + std::to_string(node) + "/coll" + std::to_string(k);
      ASSERT_TRUE(s->create_collection(p, CollectionKind::kStream).ok());
      expected.insert(p);
    }
  }
  std::set<std::string> listed;
  for (const auto& c : s->list("/")) listed.insert(c.path);
  EXPECT_EQ(listed, expected);
  EXPECT_EQ(s->list("/prod/node7").size(), 120u);
  EXPECT_EQ(s->collection_count(), 12'000u);
}

TEST_F(EventStoreTest, FiveSiblingsUnderLimitFourSplit) {
  auto s = make(4);
  for (int i = 0; i < 5; ++i) {
    ASSERT_TRUE(s->create_collection("/d/c" + std::to_string(i), CollectionKind::kStream).ok());
  }
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(s->contains("/d/c" + std::to_string(i)));
  EXPECT_LE(s->tree_shape().max_entries, 4u);
  EXPECT_GT(s->tree_shape().nodes, 2u);
}

TEST(NamespaceTreeTest, RandomInsertOrdersNeverExceedLimit) {
  for (std::size_t limit : {2u, 3u, 4u, 7u, 16u, 17u}) {
    std::mt19937_64 rng(limit);
    NamespaceTree tree(limit);
    std::map<std::string, CollectionId> oracle;
    for (CollectionId id = 1; id <= 3000; ++id) {
      // Shallow, wide paths with repeats so both splits and duplicates occur.
      std::vector<std::string> segs;
      const int depth = 1 + static_cast<int>(rng() % 3);
      for (int d = 0; d < depth; ++d) segs.push_back("s" + std::to_string(rng() % 40));
      std::string path;
      for (const auto& sg : segs) path += "/" + sg;
      const bool fresh = !oracle.count(path);
      EXPECT_EQ(tree.insert(segs, id), fresh) << path;
      if (fresh) oracle[path] = id;
      ASSERT_LE(tree.shape().max_entries, limit);
    }
    std::map<std::string, CollectionId> walked;
    tree.for_each([&](const std::string& p, CollectionId id) {
      EXPECT_TRUE(walked.emplace(p, id).second) << "listed twice: " << p;
    });
    EXPECT_EQ(walked, oracle);
    for (const auto& [p, id] : oracle) {
      auto segs = *split_path(p);
      EXPECT_EQ(tree.find(segs), id);
    }
  }
}

TEST(NamespaceTreeTest, EraseKeepsOtherEntries) {
  NamespaceTree tree(4);
  for (CollectionId i = 0; i < 50; ++i) tree.insert({"x", "c" + std::to_string(i)}, i);
  EXPECT_TRUE(tree.erase({"x", "c7"}));
  EXPECT_FALSE(tree.erase({"x", "c7"}));
  EXPECT_FALSE(tree.find({"x", "c7"}).has_value());
  EXPECT_EQ(tree.find({"x", "c8"}), 8u);
  EXPECT_EQ(tree.size(), 49u);
}

TEST_F(EventStoreTest, SkimExamples) {
  auto s = make();
  ASSERT_TRUE(s->create_collection("/src", CollectionKind::kStream).ok());
  auto events = make_events(rng_, 5);
  ASSERT_TRUE(s->append_events("/src", events).ok());

  auto empty = s->create_skim("/skims/empty", "/src", {});
  ASSERT_TRUE(empty.ok());
  EXPECT_TRUE(s->read_collection("/skims/empty")->empty());

  ASSERT_TRUE(s->create_skim("/skims/even", "/src", {0, 2, 4}, "even").ok());
  auto read = s->read_collection("/skims/even");
  ASSERT_TRUE(read.ok());
  EXPECT_EQ(*read, (std::vector<EventHeader>{events[0], events[2], events[4]}));
  auto refs = s->pointers("/skims/even");
  ASSERT_EQ(refs->size(), 3u);
  EXPECT_EQ((*refs)[1], (EventRef{fed(), "/src", 2}));

  EXPECT_EQ(s->create_skim("/skims/bad", "/src", {5}).code(), ErrorCode::kOrdinalOutOfRange);
  EXPECT_EQ(s->create_skim("/skims/bad", "/src", {2, 1}).code(), ErrorCode::kInvalidArgument);
  EXPECT_EQ(s->create_skim("/skims/bad", "/src", {1, 1}).code(), ErrorCode::kInvalidArgument);
  EXPECT_EQ(s->create_skim("/skims/bad", "/missing", {}).code(), ErrorCode::kNotFound);
  EXPECT_EQ(s->create_skim("/skims/bad", "/skims/even", {0}).code(), ErrorCode::kWrongKind);
  EXPECT_EQ(s->create_skim("/skims/even", "/src", {1}).code(), ErrorCode::kDuplicatePath);
  EXPECT_FALSE(s->contains("/skims/bad"));
}

TEST_F(EventStoreTest, RandomSkimsMatchFilteredSource) {
  auto s = make(4);
  for (int i = 0; i < 20; ++i) {
    const std::string src = "/streams/s" + std::to_string(i);
    ASSERT_TRUE(s->create_collection(src, CollectionKind::kStream).ok());
    auto events = make_events(rng_, 1 + rng_() % 60);
    ASSERT_TRUE(s->append_events(src, events).ok());
    for (int k = 0; k < 10; ++k) {
      std::vector<std::uint64_t> ords;
      for (std::uint64_t o = 0; o < events.size(); ++o) {
        if (rng_() % 3 == 0) ords.push_back(o);
      }
      const std::string path = "/skims/s" + std::to_string(i) + "/k" + std::to_string(k);
      ASSERT_TRUE(s->create_skim(path, src, ords).ok());
      std::vector<EventHeader> oracle;
      for (auto o : ords) oracle.push_back(events[o]);
      EXPECT_EQ(*s->read_collection(path), oracle);
    }
  }
  EXPECT_TRUE(s->check_self_contained().ok());
  EXPECT_LE(s->tree_shape().max_entries, 4u);
}

TEST_F(EventStoreTest, ReadsIndependentOfTreeShape) {
  auto split = make(4);
  ManualClock clock2;
  locks::LockService locks2(clock2);
  EventStore flat(fed(), locks2, clock2, {});
  std::vector<std::string> paths;
  for (int i = 0; i < 2000; ++i) {
    const std::string p = "/c/" + std::to_string(rng_() % 100) + "/x" + std::to_string(i);
    auto events = make_events(rng_, rng_() % 4);
    for (auto* st : {split.get(), &flat}) {
      ASSERT_TRUE(st->create_collection(p, CollectionKind::kStream).ok());
      ASSERT_TRUE(st->append_events(p, events).ok());
    }
    paths.push_back(p);
  }
  EXPECT_LE(split->tree_shape().max_entries, 4u);
  EXPECT_GT(flat.tree_shape().max_entries, 4u);
  for (const auto& p : paths) EXPECT_EQ(*split->read_collection(p), *flat.read_collection(p));
}

TEST_F(EventStoreTest, DanglingSkimDetectedOnRead) {
  auto s = make();
  ASSERT_TRUE(s->create_collection("/src", CollectionKind::kStream).ok());
  ASSERT_TRUE(s->append_events("/src", make_events(rng_, 3)).ok());
  ASSERT_TRUE(s->create_skim_unchecked("/bad", "/src", {1, 9}).ok());
  EXPECT_EQ(s->read_collection("/bad").code(), ErrorCode::kDanglingPointer);
  EXPECT_EQ(s->check_self_contained().code(), ErrorCode::kDanglingPointer);
  ASSERT_TRUE(s->create_skim_unchecked("/bad2", "/gone", {0}).ok());
  EXPECT_EQ(s->read_collection("/bad2").code(), ErrorCode::kDanglingPointer);
}

TEST_F(EventStoreTest, SkimHoldsUpdateLockOnlyAroundNamespaceMutation) {
  auto s = make();
  ASSERT_TRUE(s->create_collection("/src", CollectionKind::kStream).ok());
  ASSERT_TRUE(s->append_events("/src", make_events(rng_, 50'000)).ok());
  std::vector<std::uint64_t> ords(50'000);
  for (std::uint64_t i = 0; i < ords.size(); ++i) ords[i] = i;

  std::vector<std::string> phases;
  s->set_phase_observer([&](std::string_view p) { phases.emplace_back(p); });
  const std::string resource = EventStore::metadata_resource(fed(), "/skims/all");
  locks_.set_event_sink([&](const locks::LockEvent& e) {
    if (e.resource != resource) return;
    if (e.kind == locks::LockEvent::Kind::kGrant) phases.push_back("granted");
    if (e.kind == locks::LockEvent::Kind::kRelease) phases.push_back("released");
  });
  ASSERT_TRUE(s->create_skim("/skims/all", "/src", ords).ok());
  EXPECT_EQ(phases, (std::vector<std::string>{"build", "granted", "lock", "mutate", "released",
                                              "unlock"}));
  EXPECT_EQ(resource, "run1:REAL:meta:/skims");
  EXPECT_EQ(locks_.stats().at(resource).grants, 1u);
}

TEST_F(EventStoreTest, ReadWaitsForUpdateHolderAndTimesOut) {
  auto s = make();
  ASSERT_TRUE(s->create_collection("/dir/a", CollectionKind::kStream).ok());
  const std::string res = EventStore::metadata_resource(fed(), "/dir/a");
  ASSERT_TRUE(locks_.connect("job").ok());
  ASSERT_TRUE(locks_.acquire("job", res, locks::LockMode::kUpdate)->granted());
  EXPECT_EQ(s->read_collection("/dir/a").code(), ErrorCode::kLockTimeout);
  EXPECT_EQ(locks_.queue_length(res), 0u);
  ASSERT_TRUE(locks_.release("job", res).ok());

  // Concurrent READ holders do not block each other.
  ASSERT_TRUE(locks_.acquire("job", res, locks::LockMode::kRead)->granted());
  EXPECT_TRUE(s->read_collection("/dir/a").ok());
  EXPECT_EQ(s->create_skim("/dir/b", "/dir/a", {}).code(), ErrorCode::kLockTimeout);
  EXPECT_FALSE(s->contains("/dir/b"));
  // Every short-lived session was closed.
  EXPECT_EQ(locks_.session_count(), 1u);
}

TEST_F(EventStoreTest, CallerSuppliedClientMustHaveSession) {
  auto s = make();
  ASSERT_TRUE(s->create_collection("/x", CollectionKind::kStream).ok());
  EXPECT_EQ(s->read_collection("ghost", "/x").code(), ErrorCode::kNoSession);
  ASSERT_TRUE(locks_.connect("user").ok());
  EXPECT_TRUE(s->read_collection("user", "/x").ok());
  EXPECT_FALSE(locks_.holds("user", EventStore::metadata_resource(fed(), "/x")));
}

TEST_F(EventStoreTest, ConcurrentReadersAndWriters) {
  auto s = make(4);
  ASSERT_TRUE(s->create_collection("/src", CollectionKind::kStream).ok());
  ASSERT_TRUE(s->append_events("/src", make_events(rng_, 100)).ok());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        const std::string p = "/skims/t" + std::to_string(t) + "_" + std::to_string(i);
        ASSERT_TRUE(s->create_skim(p, "/src", {static_cast<std::uint64_t>(i)}).ok());
        ASSERT_EQ(s->read_collection(p)->size(), 1u);
        ASSERT_EQ(s->read_collection("/src")->size(), 100u);
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(s->list("/skims").size(), 200u);
  EXPECT_LE(s->tree_shape().max_entries, 4u);
}

class EventStorePersistenceTest : public EventStoreTest {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("petastore_events_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path dir_;
};

TEST_F(EventStorePersistenceTest, ReopenReplaysJournal) {
  auto events = make_events(rng_, 40);
  auto more = make_events(rng_, 7);
  {
    auto s = EventStore::open(dir_, fed(), locks_, clock_);
    ASSERT_TRUE(s.ok()) << s.error().to_string();
    ASSERT_TRUE((*s)->create_collection("/r/s", CollectionKind::kStream).ok());
    ASSERT_TRUE((*s)->append_events("/r/s", events).ok());
    ASSERT_TRUE((*s)->append_events("/r/s", more).ok());
    ASSERT_TRUE((*s)->create_skim("/r/k", "/r/s", {1, 3, 44}, "sel").ok());
    ASSERT_TRUE((*s)->create_skim("/r/e", "/r/s", {}).ok());
    ASSERT_TRUE((*s)->install_stream("/copy", events).ok());
  }
  auto s = EventStore::open(dir_, fed(), locks_, clock_);
  ASSERT_TRUE(s.ok()) << s.error().to_string();
  EXPECT_EQ((*s)->collection_count(), 4u);
  auto all = events;
  all.insert(all.end(), more.begin(), more.end());
  EXPECT_EQ(*(*s)->read_collection("/r/s"), all);
  EXPECT_EQ(*(*s)->read_collection("/r/k"),
            (std::vector<EventHeader>{all[1], all[3], all[44]}));
  EXPECT_EQ((*s)->info("/r/k")->selection_name, "sel");
  EXPECT_TRUE((*s)->read_collection("/r/e")->empty());
  EXPECT_EQ(*(*s)->read_collection("/copy"), events);
  // New segments after reopen must not overwrite old ones.
  ASSERT_TRUE((*s)->append_events("/copy", more).ok());
  s->reset();
  auto again = EventStore::open(dir_, fed(), locks_, clock_);
  ASSERT_TRUE(again.ok());
  EXPECT_EQ((*again)->read_collection("/r/s")->size(), 47u);
  EXPECT_EQ((*again)->read_collection("/copy")->size(), 47u);
}

TEST_F(EventStorePersistenceTest, TornJournalTailIgnored) {
  {
    auto s = EventStore::open(dir_, fed(), locks_, clock_);
    ASSERT_TRUE((*s)->create_collection("/a", CollectionKind::kStream).ok());
  }
  {
    std::ofstream j(dir_ / "namespace.journal", std::ios::app);
    j << "C\t/b\tSTR";  // no newline: never committed
  }
  {
    auto s = EventStore::open(dir_, fed(), locks_, clock_);
    ASSERT_TRUE(s.ok());
    EXPECT_TRUE((*s)->contains("/a"));
    EXPECT_FALSE((*s)->contains("/b"));
    ASSERT_TRUE((*s)->create_collection("/c", CollectionKind::kSkim).ok());
  }
  auto s = EventStore::open(dir_, fed(), locks_, clock_);
  ASSERT_TRUE(s.ok()) << s.error().to_string();
  EXPECT_TRUE((*s)->contains("/c"));
}

TEST_F(EventStorePersistenceTest, DroppedCollectionStaysDropped) {
  {
    auto s = EventStore::open(dir_, fed(), locks_, clock_);
    ASSERT_TRUE((*s)->create_collection("/a", CollectionKind::kStream).ok());
    ASSERT_TRUE((*s)->create_collection("/b", CollectionKind::kStream).ok());
    ASSERT_TRUE((*s)->drop_collection("/a").ok());
    EXPECT_EQ((*s)->drop_collection("/a").code(), ErrorCode::kNotFound);
  }
  auto s = EventStore::open(dir_, fed(), locks_, clock_);
  ASSERT_TRUE(s.ok());
  EXPECT_FALSE((*s)->contains("/a"));
  EXPECT_TRUE((*s)->contains("/b"));
  EXPECT_TRUE((*s)->create_collection("/a", CollectionKind::kStream).ok());
}

TEST_F(EventStorePersistenceTest, GarbageJournalIsMalformed) {
  std::filesystem::create_directories(dir_);
  {
    std::ofstream j(dir_ / "namespace.journal");
    j << "Z\tnonsense\n";
  }
  EXPECT_EQ(EventStore::open(dir_, fed(), locks_, clock_).code(), ErrorCode::kMalformed);
}

}  // namespace
}  // namespace petastore::events
