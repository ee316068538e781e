#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace petastore::harness {

// splitmix64 finalizer; derives independent seeds from one scenario seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

// mt19937_64 with draw helpers whose results do not depend on the standard
// library's distribution implementations, so traces match across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }
  // Uniform in [0, n); n > 0.
  std::uint64_t uniform(std::uint64_t n);
  // Uniform in [0, 1) with 53 random bits.
  double unit();
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 eng_;
};

// Zipf over ranks [0, n): P(k) proportional to 1 / (k + 1)^s.
class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double s);

  std::size_t sample(Rng& rng) const;
  double probability(std::size_t rank) const;
  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

}  // namespace petastore::harness
