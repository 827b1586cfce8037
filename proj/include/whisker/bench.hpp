#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "whisker/numtheory.hpp"

namespace whisker {

enum class SeedPolicy {
  os_entropy,  // every run seeds a fresh generator from the OS
  fixed,       // run i of every profile uses the same derived seed
};

struct BenchOptions {
  unsigned runs = 50;
  SeedPolicy seed_policy = SeedPolicy::os_entropy;
  std::uint64_t fixed_seed = 0;
};

struct ProfileTimings {
  KeygenProfile profile;
  std::vector<double> millis;  // one wall-clock sample per params + keypair cycle
  double median = 0;
  double mean = 0;
  double variance = 0;  // sample variance (population variance when runs == 1)
  /// Percent reduction of median time relative to the first profile.
  double speedup_percent = 0;
  /// baseline median / this median.
  double speedup_ratio = 1;
};

struct BenchReport {
  std::vector<ProfileTimings> profiles;

  /// The last profile measured against the first.
  double speedup_percent() const;
};

/// Times full generate_params + generate_keypair cycles per profile. The
/// first profile is the baseline. Throws Errc::usage on an empty profile list
/// or runs == 0.
BenchReport bench_keygen(std::span<const KeygenProfile> profiles, const BenchOptions& options);

/// Header `profile,run_index,millis`, one row per sample.
void write_csv(std::ostream& out, const BenchReport& report);
std::string summarize(const BenchReport& report);

double median_of(std::vector<double> values);

}  // namespace whisker
