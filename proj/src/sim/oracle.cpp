#include "sim/oracle.hpp"

#include <cmath>
#include <limits>

#include "common/errors.hpp"

namespace bayesrx::sim {

namespace {

constexpr std::size_t kMaxJoint = 1u << 20;

double squared_distance(std::span<const modem::Cx> y, std::span<const modem::Cx> model) {
  double d = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    const double re = y[n].real() - model[n].real();
    const double im = y[n].imag() - model[n].imag();
    d += re * re + im * im;
  }
  return d;
}

}  // namespace

MapPosterior map_oracle_detect(const modem::ChannelMatrix& h, std::span<const modem::Cx> y,
                               double sigma, const modem::Constellation& con,
                               modem::ChannelKind kind) {
  const std::size_t users = h.users;
  const std::size_t points = con.size();
  if (y.size() != h.antennas) throw InvalidInput("received vector length mismatch");
  double total = 1.0;
  for (std::size_t k = 0; k < users; ++k) {
    total *= static_cast<double>(points);
    if (total > static_cast<double>(kMaxJoint)) {
      throw InvalidInput("joint constellation search space exceeds 2^20");
    }
  }
  const std::size_t count = static_cast<std::size_t>(total);

  MapPosterior out;
  out.joint.assign(count, 0.0);
  out.marginals.assign(users * points, 0.0);

  std::vector<modem::Cx> s(users), model(h.antennas);
  std::vector<double> dist(count);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t idx = 0; idx < count; ++idx) {
    std::size_t rem = idx;
    for (std::size_t k = 0; k < users; ++k) {
      s[k] = con.points[rem % points];
      rem /= points;
    }
    auto hs = modem::mat_vec(h, s);
    if (kind == modem::ChannelKind::tanh_sat) {
      for (auto& v : hs) v = {std::tanh(0.5 * v.real()), std::tanh(0.5 * v.imag())};
    }
    dist[idx] = squared_distance(y, hs);
    if (dist[idx] < best) best = dist[idx];
  }

  double norm = 0.0;
  if (sigma == 0.0) {
    for (std::size_t idx = 0; idx < count; ++idx) {
      out.joint[idx] = dist[idx] == best ? 1.0 : 0.0;
      norm += out.joint[idx];
    }
  } else {
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (std::size_t idx = 0; idx < count; ++idx) {
      out.joint[idx] = std::exp(-(dist[idx] - best) * inv);
      norm += out.joint[idx];
    }
  }
  for (auto& p : out.joint) p /= norm;

  for (std::size_t idx = 0; idx < count; ++idx) {
    std::size_t rem = idx;
    for (std::size_t k = 0; k < users; ++k) {
      out.marginals[k * points + rem % points] += out.joint[idx];
      rem /= points;
    }
  }
  return out;
}

modem::SoftSymbols map_oracle_soft(const modem::ChannelMatrix& h, std::span<const modem::Cx> ys,
                                   std::size_t times, double sigma,
                                   const modem::Constellation& con, modem::ChannelKind kind) {
  if (ys.size() != times * h.antennas) throw InvalidInput("channel output size mismatch");
  modem::SoftSymbols soft{h.users, times, con.size(), {}};
  soft.data.assign(h.users * times * con.size(), 0.0);
  for (std::size_t i = 0; i < times; ++i) {
    const auto post =
        map_oracle_detect(h, ys.subspan(i * h.antennas, h.antennas), sigma, con, kind);
    for (std::size_t k = 0; k < h.users; ++k) {
      double* dst = soft.at(i, k);
      for (std::size_t p = 0; p < con.size(); ++p) dst[p] = post.marginals[k * con.size() + p];
    }
  }
  return soft;
}

std::vector<std::uint8_t> ml_oracle_decode(const code::CodeSpec& code,
                                           std::span<const double> llr) {
  if (code.message_length > 16) throw InvalidInput("codebook enumeration needs m <= 16");
  if (llr.size() != code.block_length) throw InvalidInput("LLR length mismatch");
  const std::size_t c_len = code.block_length;
  const std::size_t count = std::size_t{1} << code.message_length;

  // log P(bit=1) and log P(bit=0) per position from the LLRs.
  std::vector<double> lp1(c_len), lp0(c_len);
  for (std::size_t v = 0; v < c_len; ++v) {
    // log sigmoid(x) = -log(1 + e^-x), stable on both tails.
    lp1[v] = llr[v] >= 0.0 ? -std::log1p(std::exp(-llr[v])) : llr[v] - std::log1p(std::exp(llr[v]));
    lp0[v] = -llr[v] >= 0.0 ? -std::log1p(std::exp(llr[v])) : -llr[v] - std::log1p(std::exp(-llr[v]));
  }

  std::vector<double> logp(count);
  std::vector<std::vector<std::uint8_t>> words(count);
  std::vector<std::uint8_t> msg(code.message_length);
  double max_lp = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < count; ++m) {
    for (std::size_t b = 0; b < code.message_length; ++b) msg[b] = (m >> b) & 1u;
    words[m] = code::encode(code, msg);
    double lp = 0.0;
    for (std::size_t v = 0; v < c_len; ++v) lp += words[m][v] ? lp1[v] : lp0[v];
    logp[m] = lp;
    if (lp > max_lp) max_lp = lp;
  }

  std::vector<std::uint8_t> bits(c_len, 0);
  for (std::size_t v = 0; v < c_len; ++v) {
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t m = 0; m < count; ++m) {
      const double w = std::exp(logp[m] - max_lp);
      if (words[m][v]) {
        s1 += w;
      } else {
        s0 += w;
      }
    }
    bits[v] = s1 > s0 ? 1 : 0;
  }
  return bits;
}

}  // namespace bayesrx::sim
