#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "code/polar.hpp"
#include "modem/channel.hpp"
#include "modem/constellation.hpp"

namespace bayesrx::modem {

enum class ChannelKind { linear, tanh_sat };

// Per-user, per-time probability vectors over the constellation.
struct SoftSymbols {
  std::size_t users = 0;
  std::size_t times = 0;
  std::size_t points = 0;
  std::vector<double> data;  // (time, user, point) row-major

  static SoftSymbols uniform(std::size_t users, std::size_t times, std::size_t points) {
    SoftSymbols s{users, times, points, {}};
    s.data.assign(users * times * points, 1.0 / static_cast<double>(points));
    return s;
  }

  double* at(std::size_t time, std::size_t user) {
    return data.data() + (time * users + user) * points;
  }
  const double* at(std::size_t time, std::size_t user) const {
    return data.data() + (time * users + user) * points;
  }
};

struct BlockConfig {
  std::size_t users = 0;
  std::size_t antennas = 0;
  const Constellation* constellation = nullptr;
  ChannelKind kind = ChannelKind::linear;
  std::size_t pilot_count = 0;
  std::size_t info_count = 0;
  double snr_db = 0.0;
  const code::CodeSpec* code = nullptr;  // null for uncoded runs
};

struct TransmissionBlock {
  std::size_t users = 0;
  std::size_t antennas = 0;
  std::size_t pilot_count = 0;
  std::size_t info_count = 0;
  const Constellation* constellation = nullptr;
  ChannelMatrix channel;
  double noise_stddev = 0.0;
  double snr_db = 0.0;

  // Symbol indices, (time, user) row-major over pilots then info.
  std::vector<std::size_t> symbols;
  // Channel outputs, (time, antenna) row-major.
  std::vector<Cx> outputs;

  // Coded runs only: concatenated per-user message and codeword bits.
  std::vector<std::vector<std::uint8_t>> message_bits;
  std::vector<std::vector<std::uint8_t>> codeword_bits;
  std::size_t codewords_per_user = 0;

  std::size_t total_count() const { return pilot_count + info_count; }
  std::span<const std::size_t> symbols_at(std::size_t time) const {
    return {symbols.data() + time * users, users};
  }
  std::span<const Cx> outputs_at(std::size_t time) const {
    return {outputs.data() + time * antennas, antennas};
  }
};

// Symbols needed to carry one codeword, with zero-bit padding up to a
// multiple of bits_per_symbol; padded positions are dropped before decoding.
std::size_t symbols_per_codeword(std::size_t block_length, std::size_t bits_per_symbol);
std::vector<std::uint8_t> pad_codeword(std::span<const std::uint8_t> codeword,
                                       std::size_t bits_per_symbol);

// Pilots are uniform symbols. Uncoded info symbols are uniform too; coded
// runs draw uniform message bits per user, encode, modulate, and pad.
TransmissionBlock make_block(const BlockConfig& cfg, const ChannelMatrix& h,
                             std::mt19937_64& rng);

}  // namespace bayesrx::modem
