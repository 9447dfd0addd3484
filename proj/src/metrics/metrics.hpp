#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bayesrx::metrics {

struct PredictionRecord {
  double confidence = 0.0;  // probability assigned to the hard decision
  bool correct = false;
};

// Bins partition (0,1] into {(0,1/R], ..., ((R-1)/R, 1]}; a confidence on a
// boundary lands in the bin whose upper edge it equals. Partial tables merge
// by summing counts and the count-weighted sums.
struct ReliabilityTable {
  std::size_t bins = 0;
  std::vector<std::size_t> count;
  std::vector<double> sum_correct;
  std::vector<double> sum_conf;

  explicit ReliabilityTable(std::size_t r = 0)
      : bins(r), count(r, 0), sum_correct(r, 0.0), sum_conf(r, 0.0) {}

  void add(const PredictionRecord& rec);
  void merge(const ReliabilityTable& other);
  std::size_t total() const;
  double acc(std::size_t bin) const;
  double conf(std::size_t bin) const;
  // Count-weighted mean |acc - conf| over non-empty bins.
  double ece() const;
};

double ser(std::span<const std::size_t> estimated, std::span<const std::size_t> truth);
double ber(std::span<const std::uint8_t> estimated, std::span<const std::uint8_t> truth);

double ece(std::span<const PredictionRecord> records, std::size_t bins,
           ReliabilityTable* table_out = nullptr);

// CSV rows: bin_low, bin_high, count, acc, conf.
void write_reliability_csv(const ReliabilityTable& table, const std::string& path);

}  // namespace bayesrx::metrics
