#include "whisker/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "whisker/crypto.hpp"
#include "whisker/errors.hpp"

namespace whisker {

double median_of(std::vector<double> values) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2;
}

double BenchReport::speedup_percent() const {
  if (profiles.empty()) return 0;
  return profiles.back().speedup_percent;
}

namespace {

Csprng seeded_generator(const BenchOptions& options, unsigned run) {
  if (options.seed_policy == SeedPolicy::os_entropy) return Csprng::from_os_entropy();
  Bytes seed;
  append_u64be(seed, options.fixed_seed);
  append_u32be(seed, run);
  auto digest = sha512(seed);
  return Csprng(ByteView(digest.data(), Csprng::kSeedSize));
}

void fill_statistics(ProfileTimings& timings) {
  const auto& xs = timings.millis;
  timings.median = median_of(xs);
  timings.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - timings.mean) * (x - timings.mean);
  timings.variance = xs.size() > 1 ? ss / static_cast<double>(xs.size() - 1) : 0.0;
}

}  // namespace

BenchReport bench_keygen(std::span<const KeygenProfile> profiles, const BenchOptions& options) {
  if (profiles.empty()) throw Error(Errc::usage, "bench needs at least one profile");
  if (options.runs == 0) throw Error(Errc::usage, "bench needs at least one run");

  BenchReport report;
  for (const auto& profile : profiles) {
    ProfileTimings timings;
    timings.profile = profile;
    timings.millis.reserve(options.runs);
    report.profiles.push_back(std::move(timings));
  }
  // One untimed cycle warms caches and clocks; runs then alternate between
  // profiles so drift in machine load hits every profile alike.
  {
    Csprng rng = seeded_generator(options, options.runs);
    [[maybe_unused]] DsaKeyPair key = generate_keypair(generate_params(profiles.front(), rng), rng);
  }
  for (unsigned run = 0; run < options.runs; ++run) {
    for (auto& timings : report.profiles) {
      Csprng rng = seeded_generator(options, run);
      auto start = std::chrono::steady_clock::now();
      DsaParams params = generate_params(timings.profile, rng);
      [[maybe_unused]] DsaKeyPair key = generate_keypair(params, rng);
      auto stop = std::chrono::steady_clock::now();
      timings.millis.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
  }
  for (auto& timings : report.profiles) fill_statistics(timings);

  const double base = report.profiles.front().median;
  for (auto& timings : report.profiles) {
    timings.speedup_percent = base > 0 ? 100.0 * (1.0 - timings.median / base) : 0.0;
    timings.speedup_ratio = timings.median > 0 ? base / timings.median : 1.0;
  }
  return report;
}

void write_csv(std::ostream& out, const BenchReport& report) {
  out << "profile,run_index,millis\n";
  for (const auto& timings : report.profiles) {
    for (std::size_t i = 0; i < timings.millis.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.3f", timings.millis[i]);
      out << timings.profile.name << ',' << i << ',' << buf << '\n';
    }
  }
}

std::string summarize(const BenchReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %6s %12s %12s %12s %10s\n", "profile", "runs", "median_ms", "mean_ms",
                "stddev_ms", "speedup");
  out << line;
  for (const auto& t : report.profiles) {
    std::snprintf(line, sizeof(line), "%-12s %6zu %12.2f %12.2f %12.2f %9.1f%%\n", t.profile.name.c_str(),
                  t.millis.size(), t.median, t.mean, std::sqrt(t.variance), t.speedup_percent);
    out << line;
  }
  if (report.profiles.size() > 1) {
    const auto& last = report.profiles.back();
    std::snprintf(line, sizeof(line), "%s vs %s: median time reduced by %.1f%% (%.2fx faster)\n",
                  last.profile.name.c_str(), report.profiles.front().profile.name.c_str(), last.speedup_percent,
                  last.speedup_ratio);
    out << line;
  }
  return out.str();
}

}  // namespace whisker
