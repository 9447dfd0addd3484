#pragma once

#include <span>
#include <vector>

#include "code/polar.hpp"
#include "modem/block.hpp"
#include "modem/channel.hpp"

namespace bayesrx::sim {

// Exact symbol posterior for y = Hs + w (or tanh(0.5 Hs + w)) by enumerating
// all |S|^K transmit vectors. Noiseless inputs collapse to a uniform
// distribution over the distance-minimizing set.
struct MapPosterior {
  std::vector<double> joint;      // |S|^K, user 0 as the fastest-varying digit
  std::vector<double> marginals;  // (user, point) row-major
};

MapPosterior map_oracle_detect(const modem::ChannelMatrix& h, std::span<const modem::Cx> y,
                               double sigma, const modem::Constellation& con,
                               modem::ChannelKind kind = modem::ChannelKind::linear);

// Per-user marginals for a whole run of channel outputs.
modem::SoftSymbols map_oracle_soft(const modem::ChannelMatrix& h, std::span<const modem::Cx> ys,
                                   std::size_t times, double sigma,
                                   const modem::Constellation& con,
                                   modem::ChannelKind kind = modem::ChannelKind::linear);

// Exact bitwise-MAP codeword decisions by enumerating all 2^m codewords
// (message_length <= 16). Ties break to bit 0. LLR sign: positive = bit 1.
std::vector<std::uint8_t> ml_oracle_decode(const code::CodeSpec& code,
                                           std::span<const double> llr);

}  // namespace bayesrx::sim
