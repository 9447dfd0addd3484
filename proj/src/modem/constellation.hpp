#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bayesrx::modem {

using Cx = std::complex<double>;

inline constexpr double kLlrClip = 15.0;

enum class ConstellationKind { bpsk, qpsk, psk8 };

// Unit-energy PSK sets with Gray labels. Labels are r-bit patterns stored
// MSB-first: bit b of a symbol is codeword bit (i*r + b) of the stream.
struct Constellation {
  ConstellationKind kind;
  std::string name;
  std::size_t bits_per_symbol = 0;
  std::vector<Cx> points;
  std::vector<std::uint32_t> labels;          // label of point index
  std::vector<std::size_t> point_of_label;

  std::size_t size() const { return points.size(); }
  int label_bit(std::size_t point, std::size_t b) const {
    return static_cast<int>((labels[point] >> (bits_per_symbol - 1 - b)) & 1u);
  }
};

const Constellation& constellation(ConstellationKind kind);
ConstellationKind constellation_from_name(const std::string& name);

// Bit count must be a multiple of bits_per_symbol; callers pad beforehand.
std::vector<Cx> modulate(std::span<const std::uint8_t> bits, const Constellation& c);
std::vector<std::size_t> symbol_indices(std::span<const std::uint8_t> bits, const Constellation& c);
std::vector<std::uint8_t> bits_of_point(const Constellation& c, std::size_t point);

// c_tilde[b] = sum of probs over points whose label has bit b set.
std::vector<double> soft_bit_marginals(std::span<const double> probs, const Constellation& c);

// log(c_tilde / (1 - c_tilde)) clipped to +-15.
double llr_from_soft_bit(double soft_bit);

}  // namespace bayesrx::modem
