#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modem/block.hpp"
#include "modem/constellation.hpp"

namespace bayesrx::sim {

enum class ChannelModel { linear, tanh_sat, trace };
enum class DetectorMode { frequentist, bayesian, modular_bayesian, blackbox };
enum class DecoderMode { none, frequentist, bayesian, modular_bayesian, plain_bp };
enum class CodeChoice { none, hamming74, polar128_64 };

std::string to_string(DetectorMode m);
std::string to_string(DecoderMode m);
DetectorMode detector_mode_from_string(const std::string& s);
DecoderMode decoder_mode_from_string(const std::string& s);

// Flat key=value experiment description. Unknown keys are hard errors.
struct ExperimentConfig {
  ChannelModel channel = ChannelModel::linear;
  std::string trace_path;
  modem::ConstellationKind constellation = modem::ConstellationKind::qpsk;
  std::size_t users = 0;
  std::size_t antennas = 0;
  std::size_t detector_iterations = 3;
  std::size_t decoder_iterations = 5;
  std::size_t pilots = 0;
  std::size_t info = 0;
  std::size_t blocks = 0;
  std::vector<double> snr_db;
  DetectorMode detector_mode = DetectorMode::frequentist;
  DecoderMode decoder_mode = DecoderMode::none;
  std::size_t detector_ensemble = 5;
  std::size_t decoder_ensemble = 3;
  double beta = 1e4;
  std::size_t detector_adam_steps = 500;
  double detector_lr = 5e-3;
  std::size_t decoder_adam_steps = 500;
  double decoder_lr = 1e-3;
  double drop_prob_init = 0.1;
  double temperature = 0.1;
  double prior_stddev = 1.0;
  std::uint64_t seed = 0;
  std::size_t ece_bins = 10;
  CodeChoice code = CodeChoice::none;
  double decoder_train_snr_db = 0.0;
  bool decoder_train_snr_set = false;  // defaults to the midpoint of snr_db
  std::size_t decoder_train_frames = 48;
  bool record_runtime = false;
  std::string out_dir = ".";
  std::string out_csv = "results.csv";
  std::string decoder_path = "decoder.txt";

  double effective_decoder_train_snr() const;
  std::string csv_path() const;
  std::string decoder_file() const;
  // Stable hash of everything that affects the produced metrics.
  std::string fingerprint() const;
  void validate() const;
};

// Applies one key=value assignment; unknown keys or bad values throw
// ConfigError naming the key.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace bayesrx::sim
