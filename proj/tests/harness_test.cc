#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "petastore/harness/corpus.h"
#include "petastore/harness/report.h"
#include "petastore/harness/rng.h"
#include "petastore/harness/scenario.h"
#include "petastore/harness/simulator.h"
#include "petastore/harness/trace.h"
#include "petastore/storage/stored_file.h"

namespace petastore::harness {
namespace {

std::vector<TraceEvent> rows_of(const std::vector<TraceEvent>& trace, const std::string& event) {
  std::vector<TraceEvent> out;
  for (const auto& e : trace) {
    if (e.event == event) out.push_back(e);
  }
  return out;
}

Scenario small() {
  Scenario s;
  s.duration_s = 60;
  s.n_clients = 8;
  return s;
}

RunResult run_ok(const Scenario& s) {
  auto r = run_scenario(s);
  EXPECT_TRUE(r.ok()) << r.error().to_string();
  return r.ok() ? *r : RunResult{};
}

void expect_clean(const MetricsReport& r) {
  EXPECT_EQ(r.violations.redirect, 0u);
  EXPECT_EQ(r.violations.purge, 0u);
  EXPECT_EQ(r.violations.conservation, 0u);
  EXPECT_EQ(r.violations.lock_safety, 0u);
  EXPECT_EQ(r.violations.torn, 0u);
  EXPECT_EQ(r.sessions_at_end, r.live_clients_at_end);
  EXPECT_GE(r.availability, 0.0);
  EXPECT_LE(r.availability, 1.0);
}

// ------------------------------------------------------------------ rng

TEST(RngTest, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(RngTest, UniformStaysInRangeAndCoversIt) {
  Rng r(1);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto x = r.uniform(7);
    ASSERT_LT(x, 7u);
    ++counts[x];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RngTest, MixSeedSeparatesTags) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t tag = 0; tag < 1000; ++tag) seen.insert(mix_seed(7, tag));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}

TEST(ZipfTest, ProbabilitiesMatchClosedForm) {
  const double s = 1.1;
  ZipfSampler z(16, s);
  double h = 0;
  for (int k = 1; k <= 16; ++k) h += std::pow(k, -s);
  double sum = 0;
  for (std::size_t k = 0; k < 16; ++k) {
    EXPECT_NEAR(z.probability(k), std::pow(static_cast<double>(k + 1), -s) / h, 1e-12);
    sum += z.probability(k);
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(z.probability(0) / z.probability(1), std::pow(2.0, s), 1e-9);
}

TEST(ZipfTest, EmpiricalFrequenciesFollowTheLaw) {
  ZipfSampler z(16, 1.1);
  Rng r(9);
  std::vector<int> counts(16, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[z.sample(r)];
  for (std::size_t k = 0; k < 16; ++k) {
    const double p = z.probability(k);
    const double sigma = std::sqrt(n * p * (1 - p));
    EXPECT_NEAR(counts[k], n * p, 4 * sigma) << k;
  }
}

// --------------------------------------------------------------- corpus

TEST(CorpusTest, RecordsAreFixedSizeAndSliceable) {
  const Bytes all = synthetic_events(5, 2, 0, 20);
  ASSERT_EQ(all.size(), 20 * kEventRecordBytes);
  const Bytes part = synthetic_events(5, 2, 10, 5);
  EXPECT_TRUE(std::equal(part.begin(), part.end(), all.begin() + 10 * kEventRecordBytes));
  EXPECT_EQ(synthetic_events(5, 2, 0, 20), all);
  EXPECT_NE(synthetic_events(6, 2, 0, 20), all);
  EXPECT_NE(synthetic_events(5, 3, 0, 20), all);
}

TEST(CorpusTest, CompressesAtLeastTwoToOne) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Bytes data = synthetic_events(seed, 0, 0, 4096);
    auto f = storage::build_stored_file(data, static_cast<std::uint8_t>(storage::CodecId::kReferenceLz));
    ASSERT_TRUE(f.ok());
    const double ratio = static_cast<double>(f->logical_size()) / static_cast<double>(f->physical_size());
    EXPECT_GE(ratio, 2.0) << "seed " << seed;
    // Structured but not trivially redundant.
    EXPECT_LT(ratio, 3.0) << "seed " << seed;
  }
}

// ------------------------------------------------------------- scenario

TEST(ScenarioTest, TextRoundTrip) {
  Scenario s;
  s.seed = 18446744073709551557ull;
  s.streams_per_run = 20;
  s.policy.replicate_threshold = 3;
  s.faults.push_back({12.5, FaultKind::kSlaveOffline, "s1", {"30"}});
  s.faults.push_back({40, FaultKind::kTornWrite, "s0", {"/run1/stream3", "2"}});
  auto back = Scenario::parse(s.to_text());
  ASSERT_TRUE(back.ok()) << back.error().to_string();
  EXPECT_EQ(back->to_text(), s.to_text());
  EXPECT_EQ(back->seed, s.seed);
  EXPECT_EQ(back->faults, s.faults);
}

TEST(ScenarioTest, ParseRejectsBadInput) {
  EXPECT_EQ(Scenario::parse("bogus=1").code(), ErrorCode::kInvalidScenario);
  EXPECT_EQ(Scenario::parse("n_clients=abc").code(), ErrorCode::kInvalidScenario);
  EXPECT_EQ(Scenario::parse("n_clients=2.5").code(), ErrorCode::kInvalidScenario);
  EXPECT_EQ(Scenario::parse("no equals sign").code(), ErrorCode::kInvalidScenario);
  EXPECT_EQ(Scenario::parse("fault=10 MELTDOWN all").code(), ErrorCode::kInvalidScenario);
  EXPECT_EQ(Scenario::parse("policy.high_pct=10\npolicy.low_pct=20").code(),
            ErrorCode::kInvalidScenario);
  EXPECT_TRUE(Scenario::parse("# comment only\n\nseed=3  # trailing\n").ok());
}

TEST(ScenarioTest, FaultTargetsMustExist) {
  EXPECT_EQ(Scenario::parse("n_clients=4\nfault=1 CLIENT_CRASH c4").code(), ErrorCode::kUnknownTarget);
  EXPECT_EQ(Scenario::parse("n_slaves=3\nfault=1 SLAVE_OFFLINE s3").code(), ErrorCode::kUnknownTarget);
  EXPECT_EQ(Scenario::parse("fault=1 POWER_OUTAGE s0").code(), ErrorCode::kUnknownTarget);
  EXPECT_EQ(Scenario::parse("fault=1 PACKET_LOSS s0 5").code(), ErrorCode::kUnknownTarget);
  EXPECT_EQ(Scenario::parse("fault=1 TORN_WRITE s0 /run9/stream0 1").code(),
            ErrorCode::kUnknownTarget);
  EXPECT_EQ(Scenario::parse("fault=1 TORN_WRITE s0 /run0/stream4 1").code(),
            ErrorCode::kUnknownTarget);
  EXPECT_TRUE(Scenario::parse("n_clients=4\nfault=1 CLIENT_CRASH c3").ok());
  EXPECT_TRUE(Scenario::parse("fault=1 CLIENT_CRASH @update-holder").ok());
  EXPECT_EQ(Scenario::parse("fault=1 PACKET_LOSS network 150").code(), ErrorCode::kInvalidScenario);
}

TEST(ScenarioTest, RunRejectsInvalidScenario) {
  Scenario s = small();
  s.n_clients = 0;
  EXPECT_EQ(run_scenario(s).code(), ErrorCode::kInvalidScenario);
  s = small();
  s.faults.push_back({1, FaultKind::kClientCrash, "c99", {}});
  EXPECT_EQ(run_scenario(s).code(), ErrorCode::kUnknownTarget);
  s = small();
  s.slave_capacity_mib = 1;
  s.events_per_run = 40000;
  s.n_slaves = 1;
  EXPECT_EQ(run_scenario(s).code(), ErrorCode::kInvalidScenario);
}

// ---------------------------------------------------------------- trace

TEST(TraceTest, RoundTrip) {
  std::vector<TraceEvent> t = {
      {0, "harness", "SCENARIO", {{"seed", "1"}}},
      {15, "c0", "READ_RESULT", {{"ok", "1"}}},
      {20, "harness", "POWER_ON", {}},
  };
  const std::string text = format_trace(t);
  EXPECT_EQ(text, "0\tharness\tSCENARIO\tseed=1\n15\tc0\tREAD_RESULT\tok=1\n20\tharness\tPOWER_ON\t\n");
  auto back = parse_trace(text);
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back, t);
  EXPECT_EQ((*back)[1].int_arg("ok"), 1);
  EXPECT_EQ((*back)[1].arg("missing"), "");
  EXPECT_EQ((*back)[1].int_arg("missing", -7), -7);
}

TEST(TraceTest, MalformedLinesRejected) {
  EXPECT_EQ(parse_trace("x\tc0\tREAD\t\n").code(), ErrorCode::kMalformed);
  EXPECT_EQ(parse_trace("1\tc0\n").code(), ErrorCode::kMalformed);
  EXPECT_EQ(parse_trace("1\tc0\tREAD\tnoequals\n").code(), ErrorCode::kMalformed);
  EXPECT_EQ(parse_trace("1\t\tREAD\t\n").code(), ErrorCode::kMalformed);
}

// --------------------------------------------------------------- report

std::vector<TraceEvent> results(int ok, int failed) {
  std::vector<TraceEvent> t;
  for (int i = 0; i < ok; ++i) t.push_back({i, "c0", "READ_RESULT", {{"ok", "1"}}});
  for (int i = 0; i < failed; ++i) t.push_back({i, "c1", "READ_RESULT", {{"ok", "0"}}});
  return t;
}

TEST(AvailabilityTest, AllSucceedIsOne) {
  EXPECT_DOUBLE_EQ(compute_availability(results(50, 0)), 1.0);
  EXPECT_DOUBLE_EQ(compute_availability({}), 1.0);
}

TEST(AvailabilityTest, NinetySixOfHundred) {
  EXPECT_DOUBLE_EQ(compute_availability(results(96, 4)), 0.96);
  EXPECT_DOUBLE_EQ(compute_report(results(96, 4)).availability, 0.96);
  EXPECT_DOUBLE_EQ(compute_availability(results(0, 3)), 0.0);
}

TEST(ReportTest, RedirectToMissingCopyIsFlagged) {
  std::vector<TraceEvent> t = {
      {0, "harness", "SLAVE", {{"slave", "s0"}}},
      {0, "harness", "SLAVE", {{"slave", "s1"}}},
      {0, "harness", "PUT", {{"file", "1"}, {"slave", "s0"}, {"logical", "10"}, {"physical", "5"}, {"tertiary", "1"}}},
      {1, "m0", "REDIRECT", {{"file", "1"}, {"slave", "s0"}}},
      {2, "m0", "REDIRECT", {{"file", "1"}, {"slave", "s1"}}},
      {3, "m0", "SLAVE_OFFLINE", {{"slave", "s0"}}},
      {4, "m0", "REDIRECT", {{"file", "1"}, {"slave", "s0"}}},
  };
  const auto r = compute_report(t);
  EXPECT_EQ(r.violations.redirect, 2u);
  EXPECT_DOUBLE_EQ(r.compression_ratio, 2.0);
  EXPECT_EQ(r.redirect_histogram.at("s0"), 2u);
}

TEST(ReportTest, PurgeOfOpenFileIsFlagged) {
  std::vector<TraceEvent> t = {
      {0, "harness", "SLAVE", {{"slave", "s0"}}},
      {0, "harness", "PUT", {{"file", "1"}, {"slave", "s0"}, {"tertiary", "1"}}},
      {0, "harness", "PUT", {{"file", "2"}, {"slave", "s0"}, {"tertiary", "1"}}},
      {1, "c0", "CONN_OPEN", {{"slave", "s0"}, {"file", "1"}}},
      {2, "m0", "PURGE", {{"file", "1"}, {"slave", "s0"}}},
      {3, "m0", "PURGE", {{"file", "2"}, {"slave", "s0"}}},
  };
  EXPECT_EQ(compute_report(t).violations.purge, 1u);
}

TEST(ReportTest, PurgeOfSoleUnarchivedCopyIsFlagged) {
  std::vector<TraceEvent> t = {
      {0, "harness", "SLAVE", {{"slave", "s0"}}},
      {0, "harness", "SLAVE", {{"slave", "s1"}}},
      {0, "harness", "PUT", {{"file", "1"}, {"slave", "s0"}, {"tertiary", "0"}}},
      {0, "harness", "PLACE", {{"file", "1"}, {"slave", "s1"}}},
      {1, "m0", "PURGE", {{"file", "1"}, {"slave", "s0"}}},
      {2, "m0", "PURGE", {{"file", "1"}, {"slave", "s1"}}},
  };
  EXPECT_EQ(compute_report(t).violations.purge, 1u);
}

TEST(ReportTest, OpenWithoutSingleEndIsFlagged) {
  std::vector<TraceEvent> t = {
      {0, "c0", "OPEN", {{"id", "1"}}},  {1, "c0", "OPEN_END", {{"id", "1"}, {"status", "DONE"}}},
      {2, "c0", "OPEN", {{"id", "2"}}},  // never ends
      {3, "c1", "OPEN", {{"id", "1"}}},  {4, "c1", "OPEN_END", {{"id", "1"}, {"status", "ERR"}}},
      {5, "c1", "OPEN_END", {{"id", "1"}, {"status", "CRASH"}}},
  };
  const auto r = compute_report(t);
  EXPECT_EQ(r.violations.conservation, 2u);
  EXPECT_EQ(r.opens, 3u);
}

TEST(ReportTest, OverlappingUpdateGrantsAreFlagged) {
  std::vector<TraceEvent> t = {
      {0, "locks", "GRANT", {{"resource", "/run0"}, {"client", "c0"}, {"mode", "U"}}},
      {1, "locks", "GRANT", {{"resource", "/run0"}, {"client", "c1"}, {"mode", "R"}}},
  };
  EXPECT_EQ(compute_report(t).violations.lock_safety, 1u);
  t.insert(t.begin() + 1, {1, "locks", "RELEASE", {{"resource", "/run0"}, {"client", "c0"}, {"mode", "U"}}});
  EXPECT_EQ(compute_report(t).violations.lock_safety, 0u);
}

TEST(ReportTest, TornOutcomesMustMatchInjectedBlocks) {
  auto read = [](const std::string& result, int first, int last) {
    return TraceEvent{5, "c0", "READ",
                      {{"slave", "s0"}, {"file", "1"}, {"first_block", std::to_string(first)},
                       {"last_block", std::to_string(last)}, {"result", result}}};
  };
  std::vector<TraceEvent> t = {
      {0, "harness", "TORN_WRITE", {{"slave", "s0"}, {"file", "1"}, {"block", "3"}, {"applied", "1"}}},
      read("CHECKSUM_MISMATCH", 3, 3), read("OK", 2, 2), read("OK", 3, 4),
      read("CHECKSUM_MISMATCH", 5, 5),
  };
  const auto r = compute_report(t);
  EXPECT_EQ(r.violations.torn, 2u);
  EXPECT_EQ(r.checksum_failures, 2u);
}

TEST(ReportTest, KeyValueBlockListsEveryMetric) {
  const auto kv = compute_report(results(3, 1)).to_kv();
  for (const char* key : {"availability=0.750000", "lock_collision_rate=", "open_connections_peak=",
                          "compression_ratio=", "staging_count=", "purge_count=",
                          "orphan_locks_reaped=", "violations.torn="}) {
    EXPECT_NE(kv.find(key), std::string::npos) << key;
  }
  EXPECT_NE(compute_report(results(3, 1)).to_text().find("availability"), std::string::npos);
}

// ------------------------------------------------------------ simulator

TEST(SimulatorTest, ZeroFaultsFullAvailability) {
  const auto r = run_ok(small());
  expect_clean(r.report);
  EXPECT_GT(r.report.reads_attempted, 1000u);
  EXPECT_DOUBLE_EQ(r.report.availability, 1.0);
  EXPECT_EQ(r.report.live_clients_at_end, 8);
  EXPECT_EQ(r.report.lock_waits_unresolved, 0u);
  EXPECT_GE(r.report.compression_ratio, 2.0);
  EXPECT_EQ(r.report.opens, r.report.opens_done);
  EXPECT_EQ(rows_of(r.trace, "QUIESCENT").at(0).arg("reached"), "1");
}

TEST(SimulatorTest, SameSeedSameTrace) {
  Scenario s = small();
  s.faults.push_back({20, FaultKind::kPacketLoss, "network", {"10"}});
  s.faults.push_back({30, FaultKind::kClientCrash, "@update-holder", {}});
  const auto a = run_ok(s);
  const auto b = run_ok(s);
  EXPECT_EQ(a.trace_text, b.trace_text);
  s.seed = 2;
  EXPECT_NE(run_ok(s).trace_text, a.trace_text);
}

TEST(SimulatorTest, ReportIsAFunctionOfTheTraceText) {
  Scenario s = small();
  s.faults.push_back({25, FaultKind::kSlaveOffline, "s1", {"10"}});
  const auto r = run_ok(s);
  auto parsed = parse_trace(r.trace_text);
  ASSERT_TRUE(parsed.ok());
  EXPECT_EQ(compute_report(*parsed).to_kv(), r.report.to_kv());
}

TEST(SimulatorTest, EveryOpenTerminatesOnce) {
  Scenario s = small();
  s.faults.push_back({10, FaultKind::kClientCrash, "c1", {}});
  s.faults.push_back({20, FaultKind::kSlaveOffline, "s0", {"5"}});
  s.faults.push_back({30, FaultKind::kPowerOutage, "all", {"5"}});
  const auto r = run_ok(s);
  expect_clean(r.report);
  std::map<std::string, std::vector<std::string>> ends;
  std::set<std::string> opened;
  for (const auto& e : r.trace) {
    const std::string id = e.actor + "#" + std::string(e.arg("id"));
    if (e.event == "OPEN") opened.insert(id);
    if (e.event == "OPEN_END") ends[id].push_back(std::string(e.arg("status")));
  }
  ASSERT_FALSE(opened.empty());
  for (const auto& id : opened) {
    ASSERT_EQ(ends[id].size(), 1u) << id;
    const auto& st = ends[id][0];
    EXPECT_TRUE(st == "DONE" || st == "ERR" || st == "CRASH") << st;
  }
  EXPECT_EQ(ends.size(), opened.size());
}

TEST(SimulatorTest, CrashedUpdateHolderIsReapedAndQueuedWriterProceeds) {
  Scenario s = small();
  s.n_clients = 6;
  s.runs_in_parallel = 1;
  s.write_fraction = 1;
  s.think_time_s = 0.5;
  s.faults.push_back({20, FaultKind::kClientCrash, "@update-holder", {}});
  const auto r = run_ok(s);
  expect_clean(r.report);
  ASSERT_EQ(r.report.crashed_clients, 1u);
  EXPECT_EQ(r.report.update_locks_held_at_crash, 1u);
  EXPECT_EQ(r.report.orphan_update_locks_reaped, 1u);
  const std::int64_t deadline_us = 15'000'000;
  EXPECT_LE(r.report.max_reap_latency_us, deadline_us);
  EXPECT_GT(r.report.max_reap_latency_us, 0);
  EXPECT_EQ(r.report.lock_waits_unresolved, 0u);
  EXPECT_EQ(r.report.sessions_at_end, 5);

  // The lock was still blocking someone when it was reaped, and the first
  // grant afterwards goes to one of those queued writers.
  const auto reap = rows_of(r.trace, "REAP").at(0);
  std::set<std::string> waiting;
  std::string first_after;
  for (const auto& e : r.trace) {
    if (e.time_us < reap.time_us) {
      if (e.event == "LOCK_REQ" && e.arg("result") == "QUEUE") waiting.insert(e.actor);
      if (e.event == "LOCK_GRANTED") waiting.erase(e.actor);
    } else if (first_after.empty() && e.actor == "locks" && e.event == "GRANT") {
      first_after = std::string(e.arg("client"));
      EXPECT_EQ(e.arg("mode"), "U");
    }
  }
  EXPECT_FALSE(waiting.empty());
  EXPECT_TRUE(waiting.count(first_after)) << first_after;
  EXPECT_NE(first_after, std::string(reap.arg("client")));
}

TEST(SimulatorTest, RepeatedCrashesLeaveNoStaleSessions) {
  Scenario s = small();
  s.n_clients = 16;
  s.runs_in_parallel = 2;
  s.write_fraction = 1;
  s.think_time_s = 1;
  s.duration_s = 200;
  for (int i = 0; i < 10; ++i) {
    s.faults.push_back({10.0 + 16 * i, FaultKind::kClientCrash, "@update-holder", {}});
  }
  const auto r = run_ok(s);
  expect_clean(r.report);
  EXPECT_EQ(r.report.crashed_clients, 10u);
  EXPECT_EQ(r.report.orphan_update_locks_reaped, 10u);
  EXPECT_EQ(r.report.sessions_at_end, 6);
  EXPECT_EQ(r.report.live_clients_at_end, 6);
  EXPECT_EQ(r.report.lock_queue_at_end, 0);
  EXPECT_EQ(r.report.lock_waits_unresolved, 0u);
}

TEST(SimulatorTest, CrashOfIdleClientStillClosesItsSession) {
  Scenario s = small();
  s.faults.push_back({5, FaultKind::kClientCrash, "c2", {}});
  s.faults.push_back({6, FaultKind::kClientCrash, "c2", {}});
  const auto r = run_ok(s);
  expect_clean(r.report);
  EXPECT_EQ(r.report.crashed_clients, 1u);
  EXPECT_EQ(rows_of(r.trace, "SESSION_REAPED").size(), 1u);
  EXPECT_EQ(r.report.sessions_at_end, 7);
  const auto faults = rows_of(r.trace, "FAULT");
  EXPECT_EQ(faults.at(1).arg("applied"), "0");
}

TEST(SimulatorTest, TornWriteFailsExactlyTheCoveringReads) {
  Scenario s = small();
  s.duration_s = 120;
  s.policy.replicate_threshold = 1e9;  // keep the torn copy where it is
  const int torn_block = 2;
  s.faults.push_back({10, FaultKind::kTornWrite, "s0", {"/run0/stream0", std::to_string(torn_block)}});
  const auto r = run_ok(s);
  expect_clean(r.report);

  std::string torn_file;
  for (const auto& e : rows_of(r.trace, "PUT")) {
    if (e.arg("path") == "/run0/stream0") torn_file = std::string(e.arg("file"));
  }
  ASSERT_EQ(rows_of(r.trace, "TORN_WRITE").at(0).arg("applied"), "1");
  // Independent oracle: event e sits at byte (e / streams) * record size.
  std::uint64_t expected = 0, mismatches = 0;
  for (const auto& e : rows_of(r.trace, "READ")) {
    const auto result = e.arg("result");
    if (result != "OK" && result != "CHECKSUM_MISMATCH") continue;
    const bool covers = e.arg("slave") == "s0" && e.arg("file") == torn_file && e.time_us >= 10'000'000 &&
                        (e.int_arg("event") / s.streams_per_run) * kEventRecordBytes / s.block_size ==
                            static_cast<std::uint64_t>(torn_block);
    expected += covers;
    mismatches += result == "CHECKSUM_MISMATCH";
    EXPECT_EQ(covers, result == "CHECKSUM_MISMATCH") << e.time_us;
  }
  EXPECT_GT(expected, 0u);
  EXPECT_EQ(mismatches, expected);
  EXPECT_EQ(r.report.checksum_failures, expected);
  EXPECT_EQ(r.report.reads_attempted - r.report.reads_ok, expected);
}

TEST(SimulatorTest, FailoverKeepsAvailabilityAboveNinetySixPercent) {
  Scenario s;
  s.duration_s = 300;
  s.n_slaves = 3;
  s.policy.replicate_threshold = 5;
  s.policy.hot_load_threshold = 0;
  s.faults.push_back({150, FaultKind::kSlaveOffline, "s1", {}});
  const auto r = run_ok(s);
  expect_clean(r.report);
  EXPECT_GE(r.report.replicate_count, 2u);
  EXPECT_GE(r.report.availability, 0.96);
  // After the fault no redirect goes to s1.
  for (const auto& e : rows_of(r.trace, "REDIRECT")) {
    if (e.time_us >= 150'000'000) {
      EXPECT_NE(e.arg("slave"), "s1");
    }
  }
}

TEST(SimulatorTest, TotalPacketLossFailsReadsAfterRetries) {
  Scenario s = small();
  s.faults.push_back({20, FaultKind::kPacketLoss, "network", {"100"}});
  s.faults.push_back({30, FaultKind::kPacketLoss, "network", {"0"}});
  const auto r = run_ok(s);
  expect_clean(r.report);
  EXPECT_LT(r.report.availability, 1.0);
  for (const auto& e : r.trace) {
    if (e.event == "READ" && e.arg("result") == "TIMEOUT") {
      EXPECT_GE(e.time_us, 20'000'000);
      EXPECT_LT(e.time_us, 30'000'000);
      EXPECT_LE(e.int_arg("attempt"), 1 + s.max_retries);
    }
    if (e.event == "READ_RESULT" && e.arg("ok") == "0") {
      EXPECT_EQ(e.arg("reason"), "TIMEOUT");
    }
  }
}

TEST(SimulatorTest, PowerOutageRestartsEverything) {
  Scenario s = small();
  s.duration_s = 120;
  s.faults.push_back({10, FaultKind::kSlaveOffline, "s2", {}});
  s.faults.push_back({40, FaultKind::kPowerOutage, "all", {"20"}});
  const auto r = run_ok(s);
  expect_clean(r.report);
  EXPECT_EQ(rows_of(r.trace, "POWER_OFF").size(), 1u);
  EXPECT_EQ(rows_of(r.trace, "REBUILD").size(), 1u);
  EXPECT_LT(r.report.availability, 1.0);
  EXPECT_EQ(r.report.sessions_at_end, 8);
  for (const auto& e : r.trace) {
    if (e.event == "READ" && e.arg("result") == "OK") {
      EXPECT_FALSE(e.time_us >= 40'000'000 && e.time_us < 60'000'000);
    }
    // s2 stays out across the restart.
    if (e.event == "REDIRECT" && e.time_us >= 10'000'000) {
      EXPECT_NE(e.arg("slave"), "s2");
    }
  }
}

TEST(SimulatorTest, MastersOnlyRedirectToTheirOwnSlaves) {
  Scenario s = small();
  s.n_masters = 2;
  s.n_slaves = 4;
  s.runs_in_parallel = 4;
  const auto r = run_ok(s);
  expect_clean(r.report);
  std::set<std::string> m0, m1;
  for (const auto& e : rows_of(r.trace, "REDIRECT")) {
    (e.actor == "m0" ? m0 : m1).insert(std::string(e.arg("slave")));
  }
  EXPECT_EQ(m0, (std::set<std::string>{"s0", "s2"}));
  EXPECT_EQ(m1, (std::set<std::string>{"s1", "s3"}));
}

TEST(SimulatorTest, TinyDisksForceStagingAndPurges) {
  Scenario s = small();
  s.duration_s = 200;
  s.n_slaves = 2;
  s.runs_in_parallel = 4;
  s.events_per_run = 40000;  // about 4.6 MiB per run on disk
  s.slave_capacity_mib = 10;
  s.faults.push_back({30, FaultKind::kSlaveOffline, "s0", {"60"}});
  const auto r = run_ok(s);
  expect_clean(r.report);
  EXPECT_GT(r.report.staging_count, 0u);
  EXPECT_GT(r.report.purge_count, 0u);
  EXPECT_GE(r.report.availability, 0.96);
}

}  // namespace
}  // namespace petastore::harness
