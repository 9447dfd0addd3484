#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sim/config.hpp"

namespace bayesrx::sim {

struct MetricRecord {
  std::string fingerprint;
  std::size_t block = 0;
  double snr_db = 0.0;
  std::string detector_mode;
  std::string decoder_mode;
  double ser = 0.0;
  bool has_ber = false;
  double ber = 0.0;
  double ece = 0.0;
  std::int64_t runtime_ms = 0;
};

// Full pipeline: per (snr, block), generate the channel block, train the
// detector on the pilots, detect the information symbols, optionally decode
// with the offline-pretrained decoder, and collect metrics. Blocks run in
// parallel with derived per-block seeds; records are emitted SNR-major,
// block-minor regardless of thread count.
std::vector<MetricRecord> run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1);

// Detector-training-free reference run: exact symbol-posterior detection
// (and exact bitwise-MAP decoding when the code is small enough).
std::vector<MetricRecord> run_oracle(const ExperimentConfig& cfg, std::size_t threads = 1);

// Trains the decoder on detector soft outputs from a dedicated transmission
// at the decoder training SNR and writes it to cfg.decoder_file().
void train_decoder_offline(const ExperimentConfig& cfg);

// Columns: fingerprint,block,snr_db,detector_mode,decoder_mode,ser,ber,ece,
// runtime_ms; ber stays empty when decoding is off.
void write_metrics_csv(const std::string& path, std::span<const MetricRecord> records);
std::vector<MetricRecord> read_metrics_csv(const std::string& path);

// Runs every config and aggregates all records into one CSV.
std::vector<MetricRecord> run_sweep(std::span<const std::string> config_paths,
                                    std::size_t threads, const std::string& out_csv);

}  // namespace bayesrx::sim
