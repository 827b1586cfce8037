#include <gtest/gtest.h>

#include <sstream>

#include "whisker/bench.hpp"
#include "whisker/errors.hpp"

using namespace whisker;

TEST(Bench, SingleRunStillReportsSpeedup) {
  std::vector<KeygenProfile> profiles{KeygenProfile::baseline(), KeygenProfile::optimized()};
  BenchOptions options;
  options.runs = 1;
  BenchReport report = bench_keygen(profiles, options);
  ASSERT_EQ(report.profiles.size(), 2u);
  for (const auto& p : report.profiles) {
    EXPECT_EQ(p.millis.size(), 1u);
    EXPECT_EQ(p.median, p.millis[0]);
  }
  double expected = 100.0 * (1.0 - report.profiles[1].median / report.profiles[0].median);
  EXPECT_DOUBLE_EQ(report.speedup_percent(), expected);
}

TEST(Bench, CsvSchema) {
  std::vector<KeygenProfile> profiles{KeygenProfile::optimized()};
  BenchOptions options;
  options.runs = 3;
  BenchReport report = bench_keygen(profiles, options);
  std::ostringstream csv;
  write_csv(csv, report);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "profile,run_index,millis");
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.rfind("optimized," + std::to_string(rows) + ",", 0), 0u) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 3);
  EXPECT_NE(summarize(report).find("optimized"), std::string::npos);
}

TEST(Bench, SelfComparisonIsNearParity) {
  // Fixed seeds make run i of both columns the same work, so paired ratios
  // sit near 1 and only timer noise separates them.
  std::vector<KeygenProfile> profiles{KeygenProfile::optimized(), KeygenProfile::optimized()};
  BenchOptions options;
  options.runs = 9;
  options.seed_policy = SeedPolicy::fixed;
  options.fixed_seed = 42;
  BenchReport report = bench_keygen(profiles, options);
  std::vector<double> ratios;
  for (std::size_t i = 0; i < options.runs; ++i) {
    ratios.push_back(report.profiles[0].millis[i] / report.profiles[1].millis[i]);
  }
  EXPECT_NEAR(median_of(ratios), 1.0, 0.2);
}

TEST(Bench, UsageErrors) {
  BenchOptions options;
  options.runs = 0;
  std::vector<KeygenProfile> profiles{KeygenProfile::optimized()};
  EXPECT_THROW(bench_keygen(profiles, options), Error);
  options.runs = 1;
  EXPECT_THROW(bench_keygen(std::vector<KeygenProfile>{}, options), Error);
}

TEST(Bench, MedianOf) {
  EXPECT_DOUBLE_EQ(median_of({3, 1, 2}), 2);
  EXPECT_DOUBLE_EQ(median_of({4, 1, 2, 3}), 2.5);
}
