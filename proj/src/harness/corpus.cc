#include "petastore/harness/corpus.h"

#include <algorithm>
#include <cmath>

#include "petastore/harness/rng.h"

namespace petastore::harness {
namespace {

constexpr int kTracks = 8;
constexpr int kCaloCells = 60;

// Approximately normal from the sum of four uniforms.
double gaussish(Rng& rng) {
  return (rng.unit() + rng.unit() + rng.unit() + rng.unit() - 2.0) * 1.7320508;
}

std::int16_t quantize(double v) {
  return static_cast<std::int16_t>(std::lround(std::clamp(v, -32000.0, 32000.0)));
}

}  // namespace

Bytes synthetic_events(std::uint64_t seed, std::uint32_t run, std::uint64_t first_event,
                       std::size_t count) {
  Bytes out;
  out.reserve(count * kEventRecordBytes);
  // Layout: 16 + 8 * 12 + 60 * 2 + 24 = 256 bytes per record.
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t event = first_event + i;
    Rng rng(mix_seed(mix_seed(seed, run), event));
    ByteWriter w(&out);
    w.u64(event);
    w.u32(run);
    w.u32(rng.chance(0.9) ? 0x00010000u : 0x00010000u | static_cast<std::uint32_t>(rng.uniform(16)));
    const int tracks = 2 + static_cast<int>(rng.uniform(kTracks - 1));
    for (int t = 0; t < kTracks; ++t) {
      if (t >= tracks) {
        out.insert(out.end(), 12, 0);
        continue;
      }
      // Momenta in MeV/c, quantized to 1 MeV.
      w.u16(static_cast<std::uint16_t>(quantize(gaussish(rng) * 400)));
      w.u16(static_cast<std::uint16_t>(quantize(gaussish(rng) * 400)));
      w.u16(static_cast<std::uint16_t>(quantize(gaussish(rng) * 900 + 600)));
      w.u8(rng.chance(0.5) ? 0x01 : 0xFF);
      w.u8(static_cast<std::uint8_t>(20 + rng.uniform(20)));
      w.u16(static_cast<std::uint16_t>(rng.uniform(64)));
      w.u16(static_cast<std::uint16_t>(t));
    }
    for (int c = 0; c < kCaloCells; ++c) {
      w.u16(rng.chance(0.35) ? static_cast<std::uint16_t>(1 + rng.uniform(2000)) : 0);
    }
    // Trigger and detector status words: fixed per run.
    for (int k = 0; k < 6; ++k) w.u32(0xA5000000u | run << 8 | static_cast<std::uint32_t>(k));
  }
  return out;
}

}  // namespace petastore::harness
