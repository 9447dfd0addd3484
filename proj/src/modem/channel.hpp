#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "modem/constellation.hpp"

namespace bayesrx::modem {

struct ChannelMatrix {
  std::size_t antennas = 0;  // rows
  std::size_t users = 0;     // cols
  std::vector<Cx> a;         // row-major

  Cx& at(std::size_t n, std::size_t k) { return a[n * users + k]; }
  const Cx& at(std::size_t n, std::size_t k) const { return a[n * users + k]; }
};

// (H)_{n,k} = exp(-|n-k|), the spatially decaying synthetic channel.
ChannelMatrix exp_decay_matrix(std::size_t antennas, std::size_t users);

// snr_db = 10*log10(1/(2 sigma^2)) with unit-energy symbols; sigma is the
// per-real-dimension noise stddev.
double sigma_from_snr_db(double snr_db);

std::vector<Cx> mat_vec(const ChannelMatrix& h, std::span<const Cx> s);

// y = H s + w, circularly symmetric Gaussian noise.
std::vector<Cx> apply_linear_channel(const ChannelMatrix& h, std::span<const Cx> s,
                                     double sigma, std::mt19937_64& rng);

// y = tanh(0.5 H s + w), tanh acting on real and imaginary parts separately.
std::vector<Cx> apply_tanh_channel(const ChannelMatrix& h, std::span<const Cx> s,
                                   double sigma, std::mt19937_64& rng);

// Text trace: header "N K B", then B blocks of N rows with K "re,im" entries.
std::vector<ChannelMatrix> load_channel_trace(const std::string& path);
void write_channel_trace(const std::string& path, std::span<const ChannelMatrix> mats);

}  // namespace bayesrx::modem
