#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <utility>
#include <vector>

#include "petastore/core/event_header.h"
#include "petastore/core/state_id.h"
#include "petastore/core/types.h"
#include "test_util.h"

namespace petastore {
namespace {

TEST(EventHeaderTest, EncodedSizeFollowsFieldWidths) {
  // magic + version + event_id + run + bitmap
  constexpr std::size_t kFixed = 2 + 1 + 8 + 4 + 1;
  // kind code + file + offset + length
  constexpr std::size_t kLocator = 1 + 8 + 8 + 4;
  EventHeader none;
  EXPECT_EQ(encode_event_header(none).size(), kFixed);
  EXPECT_EQ(encode_event_header(none).size(), 16u);

  EventHeader all;
  for (auto k : kAllComponentKinds) all.set_component(k, {1, 2, 3});
  EXPECT_EQ(encode_event_header(all).size(), kFixed + 8 * kLocator);
  EXPECT_EQ(encode_event_header(all).size(), 184u);
}

TEST(EventHeaderTest, RoundTripRandomHeaders) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    EventHeader h = testing_util::random_header(rng);
    auto bytes = encode_event_header(h);
    ASSERT_LE(bytes.size(), kEventHeaderMaxBytes);
    auto back = decode_event_header(bytes);
    ASSERT_TRUE(back.ok()) << back.error().to_string();
    EXPECT_EQ(*back, h);
  }
}

TEST(EventHeaderTest, LengthMonotoneInComponentCount) {
  std::mt19937_64 rng(11);
  EventHeader h = testing_util::random_header(rng);
  h.components = {};
  std::size_t prev = encode_event_header(h).size();
  for (auto k : kAllComponentKinds) {
    h.set_component(k, {rng(), rng(), static_cast<std::uint32_t>(rng())});
    const std::size_t len = encode_event_header(h).size();
    EXPECT_GE(len, prev);
    EXPECT_LE(len, kEventHeaderMaxBytes);
    prev = len;
  }
}

TEST(EventHeaderTest, EmptyInputIsMalformed) {
  auto r = decode_event_header({});
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.code(), ErrorCode::kMalformed);
}

TEST(EventHeaderTest, BadMagicAndVersionAreMalformed) {
  EventHeader h;
  h.event_id = 5;
  auto bytes = encode_event_header(h);
  auto bad_magic = bytes;
  bad_magic[0] ^= 0xFF;
  EXPECT_EQ(decode_event_header(bad_magic).code(), ErrorCode::kMalformed);
  auto bad_version = bytes;
  bad_version[2] = 9;
  EXPECT_EQ(decode_event_header(bad_version).code(), ErrorCode::kMalformed);
  bytes.push_back(0);
  EXPECT_EQ(decode_event_header(bytes).code(), ErrorCode::kMalformed);
}

TEST(EventHeaderTest, EveryBitmapValueIsRejectedOrDiffers) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    EventHeader h = testing_util::random_header(rng);
    const auto bytes = encode_event_header(h);
    constexpr std::size_t kBitmapPos = 15;
    for (int v = 0; v < 256; ++v) {
      if (v == bytes[kBitmapPos]) continue;
      auto flipped = bytes;
      flipped[kBitmapPos] = static_cast<std::uint8_t>(v);
      auto r = decode_event_header(flipped);
      if (r.ok()) {
        EXPECT_NE(*r, h);
      } else {
        EXPECT_EQ(r.code(), ErrorCode::kMalformed);
      }
    }
  }
}

TEST(EventHeaderTest, EverySingleByteCorruptionIsRejectedOrDiffers) {
  std::mt19937_64 rng(5);
  EventHeader h = testing_util::random_header(rng);
  const auto bytes = encode_event_header(h);
  for (std::size_t pos = 0; pos < bytes.size(); ++pos) {
    for (int x = 1; x < 256; ++x) {
      auto flipped = bytes;
      flipped[pos] ^= static_cast<std::uint8_t>(x);
      auto r = decode_event_header(flipped);
      if (r.ok()) {
        EXPECT_NE(*r, h) << "pos " << pos;
      }
    }
  }
}

TEST(EventHeaderTest, TruncationsAreMalformed) {
  EventHeader h;
  for (auto k : kAllComponentKinds) h.set_component(k, {9, 9, 9});
  const auto bytes = encode_event_header(h);
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    auto r = decode_event_header(ByteSpan(bytes).first(n));
    EXPECT_EQ(r.code(), ErrorCode::kMalformed) << n;
  }
}

TEST(StateIdTest, DeterministicAndSensitiveToCutoff) {
  const SimTime t = sim_time_from_us(1'000'000'000);
  std::vector<RevisionBinding> b = {{"/calib", "prod-r3"}, {"/geom", "v2"}};
  auto a1 = compute_state_id("prod", t, b);
  auto a2 = compute_state_id("prod", t, b);
  ASSERT_TRUE(a1.ok());
  EXPECT_EQ(*a1, *a2);
  auto later = compute_state_id("prod", t + seconds(1), b);
  EXPECT_NE(*a1, *later);
  auto renamed = compute_state_id("prod2", t, b);
  EXPECT_NE(*a1, *renamed);
  b[1].revision = "v3";
  EXPECT_NE(*a1, *compute_state_id("prod", t, b));
}

TEST(StateIdTest, PermutedThenResortedBindingsAgree) {
  std::vector<RevisionBinding> b = {{"/a", "r1"}, {"/b", "r2"}, {"/c/d", "r3"}, {"/e", "r4"}};
  const SimTime t = sim_time_from_us(42);
  auto reference = compute_state_id("cfg", t, b);
  ASSERT_TRUE(reference.ok());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    auto p = b;
    std::shuffle(p.begin(), p.end(), rng);
    std::sort(p.begin(), p.end());
    EXPECT_EQ(*compute_state_id("cfg", t, p), *reference);
  }
}

TEST(StateIdTest, UnsortedBindingsRejected) {
  std::vector<RevisionBinding> b = {{"/b", "r"}, {"/a", "r"}};
  EXPECT_EQ(compute_state_id("cfg", kSimEpoch, b).code(), ErrorCode::kUnsortedBindings);
  std::vector<RevisionBinding> dup = {{"/a", "r"}, {"/a", "s"}};
  EXPECT_EQ(compute_state_id("cfg", kSimEpoch, dup).code(), ErrorCode::kUnsortedBindings);
}

TEST(StateIdTest, HexRoundTrip) {
  auto id = compute_state_id("cfg", sim_time_from_us(7), {});
  ASSERT_TRUE(id.ok());
  const std::string hex = id->to_hex();
  EXPECT_EQ(hex.size(), 64u);
  auto back = StateId::from_hex(hex);
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back, *id);
  EXPECT_FALSE(StateId::from_hex("zz").ok());
}

TEST(StateIdTest, MillionDistinctInputsGiveDistinctDigests) {
  std::mt19937_64 rng(99);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> prefixes;
  prefixes.reserve(1'000'000);
  for (int i = 0; i < 1'000'000; ++i) {
    // The counter in the cutoff makes every input distinct.
    std::vector<RevisionBinding> b = {{"/calib", "r" + std::to_string(rng() % 1000)}};
    auto id = compute_state_id("cfg", sim_time_from_us(i), b);
    const auto& d = id->digest();
    std::uint64_t hi = 0, lo = 0;
    for (int k = 0; k < 8; ++k) hi = hi << 8 | d[k];
    for (int k = 8; k < 16; ++k) lo = lo << 8 | d[k];
    prefixes.emplace_back(hi, lo);
  }
  std::sort(prefixes.begin(), prefixes.end());
  EXPECT_EQ(std::adjacent_find(prefixes.begin(), prefixes.end()), prefixes.end());
}

TEST(FederationIdTest, ParseAndFormat) {
  auto id = FederationId::parse("run3:SIM");
  ASSERT_TRUE(id.ok());
  EXPECT_EQ(id->run_label, "run3");
  EXPECT_EQ(id->data_class, DataClass::kSim);
  EXPECT_EQ(id->to_string(), "run3:SIM");
  EXPECT_FALSE(FederationId::parse("run3").ok());
  EXPECT_FALSE(FederationId::parse(":REAL").ok());
  EXPECT_FALSE(FederationId::parse("run3:FAKE").ok());
}

}  // namespace
}  // namespace petastore
