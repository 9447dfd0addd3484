#include "modem/constellation.hpp"

#include <cmath>
#include <numbers>

#include "common/errors.hpp"

namespace bayesrx::modem {

namespace {

// 2^r-PSK at angles pi*l*2/2^r (BPSK: +1,-1; QPSK: corners at 45 degrees;
// 8-PSK: e^{j pi l / 4}), point l labeled with the Gray code of l.
Constellation make_psk(ConstellationKind kind, std::string name, std::size_t r, double phase0) {
  Constellation c;
  c.kind = kind;
  c.name = std::move(name);
  c.bits_per_symbol = r;
  const std::size_t m = std::size_t{1} << r;
  c.points.resize(m);
  c.labels.resize(m);
  c.point_of_label.resize(m);
  for (std::size_t l = 0; l < m; ++l) {
    const double ang = phase0 + 2.0 * std::numbers::pi * static_cast<double>(l) / static_cast<double>(m);
    c.points[l] = Cx(std::cos(ang), std::sin(ang));
    const std::uint32_t g = static_cast<std::uint32_t>(l ^ (l >> 1));
    c.labels[l] = g;
    c.point_of_label[g] = l;
  }
  return c;
}

Constellation make_bpsk() {
  auto c = make_psk(ConstellationKind::bpsk, "bpsk", 1, 0.0);
  c.points[0] = Cx(1.0, 0.0);   // exact +-1, no cos/sin rounding
  c.points[1] = Cx(-1.0, 0.0);
  return c;
}

Constellation make_qpsk() {
  auto c = make_psk(ConstellationKind::qpsk, "qpsk", 2, std::numbers::pi / 4.0);
  const double s = std::sqrt(0.5);
  c.points[0] = Cx(s, s);
  c.points[1] = Cx(-s, s);
  c.points[2] = Cx(-s, -s);
  c.points[3] = Cx(s, -s);
  return c;
}

Constellation make_psk8() {
  auto c = make_psk(ConstellationKind::psk8, "psk8", 3, 0.0);
  const double s = std::sqrt(0.5);
  c.points[0] = Cx(1.0, 0.0);
  c.points[2] = Cx(0.0, 1.0);
  c.points[4] = Cx(-1.0, 0.0);
  c.points[6] = Cx(0.0, -1.0);
  c.points[1] = Cx(s, s);
  c.points[3] = Cx(-s, s);
  c.points[5] = Cx(-s, -s);
  c.points[7] = Cx(s, -s);
  return c;
}

}  // namespace

const Constellation& constellation(ConstellationKind kind) {
  static const Constellation bpsk = make_bpsk();
  static const Constellation qpsk = make_qpsk();
  static const Constellation psk8 = make_psk8();
  switch (kind) {
    case ConstellationKind::bpsk: return bpsk;
    case ConstellationKind::qpsk: return qpsk;
    case ConstellationKind::psk8: return psk8;
  }
  throw InvalidInput("unknown constellation kind");
}

ConstellationKind constellation_from_name(const std::string& name) {
  if (name == "bpsk") return ConstellationKind::bpsk;
  if (name == "qpsk") return ConstellationKind::qpsk;
  if (name == "psk8" || name == "8psk") return ConstellationKind::psk8;
  throw ConfigError("constellation: unknown value '" + name + "'");
}

std::vector<std::size_t> symbol_indices(std::span<const std::uint8_t> bits, const Constellation& c) {
  const std::size_t r = c.bits_per_symbol;
  if (bits.size() % r != 0) throw InvalidInput("bit count not divisible by bits per symbol");
  std::vector<std::size_t> idx(bits.size() / r);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::uint32_t pattern = 0;
    for (std::size_t b = 0; b < r; ++b) {
      const std::uint8_t bit = bits[i * r + b];
      if (bit > 1) throw InvalidInput("non-binary bit value");
      pattern = (pattern << 1) | bit;
    }
    idx[i] = c.point_of_label[pattern];
  }
  return idx;
}

std::vector<Cx> modulate(std::span<const std::uint8_t> bits, const Constellation& c) {
  auto idx = symbol_indices(bits, c);
  std::vector<Cx> s(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) s[i] = c.points[idx[i]];
  return s;
}

std::vector<std::uint8_t> bits_of_point(const Constellation& c, std::size_t point) {
  std::vector<std::uint8_t> bits(c.bits_per_symbol);
  for (std::size_t b = 0; b < c.bits_per_symbol; ++b) {
    bits[b] = static_cast<std::uint8_t>(c.label_bit(point, b));
  }
  return bits;
}

std::vector<double> soft_bit_marginals(std::span<const double> probs, const Constellation& c) {
  if (probs.size() != c.size()) throw InvalidInput("probability vector size mismatch");
  std::vector<double> soft(c.bits_per_symbol, 0.0);
  for (std::size_t p = 0; p < c.size(); ++p) {
    for (std::size_t b = 0; b < c.bits_per_symbol; ++b) {
      if (c.label_bit(p, b)) soft[b] += probs[p];
    }
  }
  return soft;
}

double llr_from_soft_bit(double soft_bit) {
  const double p = std::min(std::max(soft_bit, 0.0), 1.0);
  double llr;
  if (p <= 0.0) {
    llr = -kLlrClip;
  } else if (p >= 1.0) {
    llr = kLlrClip;
  } else {
    llr = std::log(p) - std::log(1.0 - p);
  }
  return std::min(std::max(llr, -kLlrClip), kLlrClip);
}

}  // namespace bayesrx::modem
