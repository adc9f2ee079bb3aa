#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace adfs {

/// SplitMix64 finalizer. Used to derive independent seeds for sub-streams.
std::uint64_t splitmix64(std::uint64_t x);

/// Seedable, splittable generator with reproducible output on every platform.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All derived variates (uniform, normal, exponential, categorical)
/// are computed in this file rather than through <random> distributions, whose
/// algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Child generator whose stream does not overlap with this one in practice.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in (0, 1).
  double uniform_open();
  double normal();
  double exponential(double rate = 1.0);
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Walker alias table for O(1) categorical sampling.
class DiscreteSampler {
 public:
  DiscreteSampler() = default;
  explicit DiscreteSampler(std::span<const double> weights);

  std::size_t operator()(Rng& rng) const;
  std::size_t size() const { return prob_.size(); }
  double probability(std::size_t i) const { return normalized_[i]; }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
  std::vector<double> normalized_;
};

}  // namespace adfs
