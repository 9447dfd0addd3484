#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "common/errors.hpp"
#include "doctest.h"
#include "metrics/metrics.hpp"

using namespace bayesrx;
using metrics::PredictionRecord;

namespace {

// Reference ECE: explicit interval membership per bin, then the weighted
// accuracy/confidence gap summed by definition.
double reference_ece(const std::vector<PredictionRecord>& records, std::size_t bins) {
  double total = static_cast<double>(records.size());
  double e = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    const double low = static_cast<double>(b) / static_cast<double>(bins);
    const double high = static_cast<double>(b + 1) / static_cast<double>(bins);
    double n = 0.0, acc = 0.0, conf = 0.0;
    for (const auto& r : records) {
      const bool member = (r.confidence > low && r.confidence <= high) ||
                          (b == 0 && r.confidence <= high);
      if (!member) continue;
      n += 1.0;
      acc += r.correct ? 1.0 : 0.0;
      conf += r.confidence;
    }
    if (n == 0.0) continue;
    e += (n / total) * std::abs(acc / n - conf / n);
  }
  return e;
}

std::vector<PredictionRecord> random_records(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uc(0.0, 1.0);
  std::vector<PredictionRecord> recs(n);
  for (auto& r : recs) {
    r.confidence = uc(rng);
    r.correct = uc(rng) < 0.5;
  }
  return recs;
}

}  // namespace

TEST_CASE("symbol error rate counts mismatched slots") {
  const std::vector<std::size_t> truth{0, 1, 2, 3, 0, 1, 2, 3};
  CHECK(metrics::ser(truth, truth) == 0.0);
  std::vector<std::size_t> all_off(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) all_off[i] = truth[i] ^ 1u;
  CHECK(metrics::ser(all_off, truth) == 1.0);

  std::vector<std::size_t> forty(40, 2), est = forty;
  est[3] = 0;
  est[17] = 1;
  est[39] = 3;
  CHECK(metrics::ser(est, forty) == 0.075);

  CHECK_THROWS_AS((void)metrics::ser(std::vector<std::size_t>(3, 0), truth), InvalidInput);
  CHECK_THROWS_AS((void)metrics::ser({}, {}), InvalidInput);
}

TEST_CASE("bit error rate counts flipped bits") {
  std::vector<std::uint8_t> truth(128);
  std::mt19937_64 rng(1);
  for (auto& b : truth) b = static_cast<std::uint8_t>(rng() % 2);
  CHECK(metrics::ber(truth, truth) == 0.0);
  std::vector<std::uint8_t> comp(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) comp[i] = truth[i] ^ 1u;
  CHECK(metrics::ber(comp, truth) == 1.0);

  auto est = truth;
  for (std::size_t i : {5u, 20u, 64u, 100u, 127u}) est[i] ^= 1u;
  CHECK(metrics::ber(est, truth) == 0.0390625);

  CHECK_THROWS_AS((void)metrics::ber(std::vector<std::uint8_t>(3, 0), truth), InvalidInput);
}

TEST_CASE("uniformly confident correct records have the confidence gap") {
  std::vector<PredictionRecord> recs(200, PredictionRecord{0.95, true});
  CHECK(metrics::ece(recs, 10) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("overconfident records show the accuracy shortfall") {
  std::vector<PredictionRecord> recs;
  for (int i = 0; i < 10; ++i) recs.push_back({0.9, i < 8});
  CHECK(metrics::ece(recs, 10) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("exactly calibrated bins give zero") {
  std::vector<PredictionRecord> recs;
  for (int i = 0; i < 4; ++i) recs.push_back({0.75, i < 3});
  for (int i = 0; i < 2; ++i) recs.push_back({0.5, i < 1});
  CHECK(metrics::ece(recs, 4) == 0.0);
}

TEST_CASE("a calibrated synthetic million stays under one percent") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uc(0.0, 1.0);
  std::vector<PredictionRecord> recs(1000000);
  for (auto& r : recs) {
    r.confidence = uc(rng);
    r.correct = uc(rng) < r.confidence;
  }
  CHECK(metrics::ece(recs, 10) < 0.01);
}

TEST_CASE("binned computation matches the brute-force definition") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> ub(1, 12);
  std::uniform_int_distribution<std::size_t> un(1, 200);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t bins = ub(rng);
    const auto recs = random_records(un(rng), rng);
    const double e = metrics::ece(recs, bins);
    CHECK(e == doctest::Approx(reference_ece(recs, bins)).epsilon(1e-12));
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
}

TEST_CASE("record order and batch splits do not change the result") {
  std::mt19937_64 rng(4);
  auto recs = random_records(500, rng);
  const double base = metrics::ece(recs, 10);

  std::shuffle(recs.begin(), recs.end(), rng);
  CHECK(metrics::ece(recs, 10) == doctest::Approx(base).epsilon(1e-12));

  metrics::ReliabilityTable merged(10);
  for (std::size_t start = 0; start < recs.size(); start += 170) {
    metrics::ReliabilityTable part(10);
    const std::size_t end = std::min(recs.size(), start + 170);
    for (std::size_t i = start; i < end; ++i) part.add(recs[i]);
    merged.merge(part);
  }
  CHECK(merged.total() == recs.size());
  CHECK(merged.ece() == doctest::Approx(base).epsilon(1e-12));

  metrics::ReliabilityTable other(5);
  CHECK_THROWS_AS(merged.merge(other), InvalidInput);
}

TEST_CASE("bin counts sum to the number of records") {
  std::mt19937_64 rng(5);
  const auto recs = random_records(321, rng);
  metrics::ReliabilityTable table(10);
  (void)metrics::ece(recs, 10, &table);
  CHECK(table.total() == recs.size());
}

TEST_CASE("boundary confidences belong to the lower bin") {
  metrics::ReliabilityTable table(10);
  table.add({0.1, true});
  CHECK(table.count[0] == 1);
  table.add({0.1 + 1e-9, true});
  CHECK(table.count[1] == 1);
  table.add({1.0, true});
  CHECK(table.count[9] == 1);
  table.add({0.0, false});
  CHECK(table.count[0] == 2);
}

TEST_CASE("degenerate inputs are rejected") {
  std::vector<PredictionRecord> recs{{0.5, true}};
  CHECK_THROWS_AS((void)metrics::ece(recs, 0), InvalidInput);
  CHECK_THROWS_AS((void)metrics::ece({}, 10), InvalidInput);
  metrics::ReliabilityTable empty(10);
  CHECK_THROWS_AS((void)empty.ece(), InvalidInput);
}

TEST_CASE("reliability tables export one labeled row per bin") {
  std::mt19937_64 rng(6);
  const auto recs = random_records(50, rng);
  metrics::ReliabilityTable table(4);
  (void)metrics::ece(recs, 4, &table);
  const std::string path = "reliability_test.csv";
  metrics::write_reliability_csv(table, path);

  std::ifstream f(path);
  REQUIRE(static_cast<bool>(f));
  std::string header;
  std::getline(f, header);
  CHECK(header == "bin_low,bin_high,count,acc,conf");
  std::size_t rows = 0, total = 0;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream in(line);
    double low = 0, high = 0, acc = 0, conf = 0;
    std::size_t count = 0;
    REQUIRE(static_cast<bool>(in >> low >> high >> count >> acc >> conf));
    CHECK(low == doctest::Approx(rows / 4.0));
    CHECK(high == doctest::Approx((rows + 1) / 4.0));
    total += count;
    ++rows;
  }
  CHECK(rows == 4);
  CHECK(total == recs.size());
  std::remove(path.c_str());
}
