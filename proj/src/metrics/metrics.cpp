#include "metrics/metrics.hpp"

#include <cmath>
#include <fstream>

#include "common/errors.hpp"

namespace bayesrx::metrics {

namespace {

std::size_t bin_of(double conf, std::size_t bins) {
  // Smallest r with conf <= r/bins; conf = 0 joins the first bin.
  for (std::size_t r = 1; r < bins; ++r) {
    if (conf <= static_cast<double>(r) / static_cast<double>(bins)) return r - 1;
  }
  return bins - 1;
}

}  // namespace

void ReliabilityTable::add(const PredictionRecord& rec) {
  const std::size_t b = bin_of(rec.confidence, bins);
  count[b] += 1;
  sum_correct[b] += rec.correct ? 1.0 : 0.0;
  sum_conf[b] += rec.confidence;
}

void ReliabilityTable::merge(const ReliabilityTable& other) {
  if (other.bins != bins) throw InvalidInput("reliability tables have different bin counts");
  for (std::size_t b = 0; b < bins; ++b) {
    count[b] += other.count[b];
    sum_correct[b] += other.sum_correct[b];
    sum_conf[b] += other.sum_conf[b];
  }
}

std::size_t ReliabilityTable::total() const {
  std::size_t t = 0;
  for (auto c : count) t += c;
  return t;
}

double ReliabilityTable::acc(std::size_t bin) const {
  return count[bin] == 0 ? 0.0 : sum_correct[bin] / static_cast<double>(count[bin]);
}

double ReliabilityTable::conf(std::size_t bin) const {
  return count[bin] == 0 ? 0.0 : sum_conf[bin] / static_cast<double>(count[bin]);
}

double ReliabilityTable::ece() const {
  const std::size_t n = total();
  if (n == 0) throw InvalidInput("reliability table is empty");
  double e = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    e += (static_cast<double>(count[b]) / static_cast<double>(n)) * std::abs(acc(b) - conf(b));
  }
  return e;
}

double ser(std::span<const std::size_t> estimated, std::span<const std::size_t> truth) {
  if (estimated.size() != truth.size() || estimated.empty()) {
    throw InvalidInput("symbol sequences must be non-empty and equally sized");
  }
  std::size_t errors = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) errors += estimated[i] != truth[i] ? 1 : 0;
  return static_cast<double>(errors) / static_cast<double>(truth.size());
}

double ber(std::span<const std::uint8_t> estimated, std::span<const std::uint8_t> truth) {
  if (estimated.size() != truth.size() || estimated.empty()) {
    throw InvalidInput("bit sequences must be non-empty and equally sized");
  }
  std::size_t errors = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) errors += estimated[i] != truth[i] ? 1 : 0;
  return static_cast<double>(errors) / static_cast<double>(truth.size());
}

double ece(std::span<const PredictionRecord> records, std::size_t bins,
           ReliabilityTable* table_out) {
  if (bins < 1) throw InvalidInput("bin count must be at least 1");
  if (records.empty()) throw InvalidInput("no prediction records");
  ReliabilityTable table(bins);
  for (const auto& rec : records) table.add(rec);
  const double e = table.ece();
  if (table_out) *table_out = table;
  return e;
}

void write_reliability_csv(const ReliabilityTable& table, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "bin_low,bin_high,count,acc,conf\n";
  for (std::size_t b = 0; b < table.bins; ++b) {
    f << static_cast<double>(b) / static_cast<double>(table.bins) << ","
      << static_cast<double>(b + 1) / static_cast<double>(table.bins) << "," << table.count[b]
      << "," << table.acc(b) << "," << table.conf(b) << "\n";
  }
  if (!f) throw IoError("short write to " + path);
}

}  // namespace bayesrx::metrics
