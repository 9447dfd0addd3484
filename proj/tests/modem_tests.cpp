#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <bit>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <vector>

#include "code/polar.hpp"
#include "common/errors.hpp"
#include "doctest.h"
#include "modem/block.hpp"
#include "modem/channel.hpp"
#include "modem/constellation.hpp"
#include "sim/oracle.hpp"

using namespace bayesrx;
using modem::Cx;

namespace {

modem::ChannelMatrix identity_channel(std::size_t n) {
  modem::ChannelMatrix h;
  h.antennas = n;
  h.users = n;
  h.a.assign(n * n, Cx{});
  for (std::size_t i = 0; i < n; ++i) h.at(i, i) = Cx{1.0, 0.0};
  return h;
}

}  // namespace

TEST_CASE("exponential decay channel entries") {
  const auto h = modem::exp_decay_matrix(4, 4);
  CHECK(h.at(0, 0).real() == 1.0);
  CHECK(h.at(0, 1).real() == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(h.at(0, 1).real() == doctest::Approx(0.36788).epsilon(1e-4));
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(h.at(n, k) == h.at(k, n));
      CHECK(h.at(n, k).imag() == 0.0);
    }
}

TEST_CASE("noise stddev follows the snr definition") {
  CHECK(modem::sigma_from_snr_db(0.0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  const double sigma = modem::sigma_from_snr_db(10.0);
  CHECK(10.0 * std::log10(1.0 / (2.0 * sigma * sigma)) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("linear channel is exact without noise") {
  const auto h = modem::exp_decay_matrix(3, 2);
  const std::vector<Cx> s{{0.3, -0.4}, {-1.0, 0.2}};
  std::mt19937_64 rng(1);
  const auto y = modem::apply_linear_channel(h, s, 0.0, rng);
  const auto hs = modem::mat_vec(h, s);
  for (std::size_t n = 0; n < y.size(); ++n) CHECK(y[n] == hs[n]);
}

TEST_CASE("linear channel noise has the right mean and variance") {
  const auto h = identity_channel(2);
  const std::vector<Cx> s{{0.6, 0.8}, {-1.0, 0.0}};
  const double sigma = 0.5;
  std::mt19937_64 rng(2);
  const std::size_t draws = 100000;
  Cx mean0{}, mean1{};
  double power = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto y = modem::apply_linear_channel(h, s, sigma, rng);
    mean0 += y[0];
    mean1 += y[1];
    power += std::norm(y[0] - s[0]) + std::norm(y[1] - s[1]);
  }
  const double tol = 3.0 * sigma / std::sqrt(static_cast<double>(draws));
  mean0 /= static_cast<double>(draws);
  mean1 /= static_cast<double>(draws);
  CHECK(std::abs(mean0.real() - s[0].real()) < tol);
  CHECK(std::abs(mean0.imag() - s[0].imag()) < tol);
  CHECK(std::abs(mean1.real() - s[1].real()) < tol);
  CHECK(std::abs(mean1.imag() - s[1].imag()) < tol);
  const double var = power / (2.0 * draws);
  CHECK(var == doctest::Approx(2.0 * sigma * sigma).epsilon(0.02));
}

TEST_CASE("saturating channel hand values") {
  std::mt19937_64 rng(3);
  const auto h = identity_channel(1);
  const auto zero = modem::apply_tanh_channel(h, std::vector<Cx>{{0.0, 0.0}}, 0.0, rng);
  CHECK(zero[0] == Cx{0.0, 0.0});

  const auto big = modem::apply_tanh_channel(h, std::vector<Cx>{{20.0, -20.0}}, 0.0, rng);
  CHECK(big[0].real() >= 0.995);
  CHECK(big[0].imag() <= -0.995);

  const auto one = modem::apply_tanh_channel(h, std::vector<Cx>{{1.0, 0.0}}, 0.0, rng);
  CHECK(one[0].real() == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
  CHECK(one[0].real() == doctest::Approx(0.46212).epsilon(1e-4));
  CHECK(one[0].imag() == 0.0);
}

TEST_CASE("constellations are unit energy gray-labeled bijections") {
  for (auto kind :
       {modem::ConstellationKind::bpsk, modem::ConstellationKind::qpsk, modem::ConstellationKind::psk8}) {
    const auto& c = modem::constellation(kind);
    CHECK(c.size() == (1u << c.bits_per_symbol));
    std::vector<bool> seen(c.size(), false);
    for (std::size_t p = 0; p < c.size(); ++p) {
      CHECK(std::abs(std::abs(c.points[p]) - 1.0) < 1e-12);
      CHECK(c.labels[p] < c.size());
      CHECK_FALSE(seen[c.labels[p]]);
      seen[c.labels[p]] = true;
      const auto diff = c.labels[p] ^ c.labels[(p + 1) % c.size()];
      if (c.size() > 1) CHECK(std::popcount(diff) == 1);
    }
  }
}

TEST_CASE("modulation sign and corner conventions") {
  const auto& bpsk = modem::constellation(modem::ConstellationKind::bpsk);
  const auto plus = modem::modulate(std::vector<std::uint8_t>{0}, bpsk);
  const auto minus = modem::modulate(std::vector<std::uint8_t>{1}, bpsk);
  CHECK(plus[0] == Cx{1.0, 0.0});
  CHECK(minus[0] == Cx{-1.0, 0.0});

  const auto& qpsk = modem::constellation(modem::ConstellationKind::qpsk);
  const auto corner = modem::modulate(std::vector<std::uint8_t>{0, 0}, qpsk);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(corner[0].real() == doctest::Approx(inv_sqrt2).epsilon(1e-15));
  CHECK(corner[0].imag() == doctest::Approx(inv_sqrt2).epsilon(1e-15));

  const auto& psk8 = modem::constellation(modem::ConstellationKind::psk8);
  CHECK(psk8.points[2].real() == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(psk8.points[2].imag() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("bit to symbol mapping round trips") {
  std::mt19937_64 rng(4);
  for (auto kind :
       {modem::ConstellationKind::bpsk, modem::ConstellationKind::qpsk, modem::ConstellationKind::psk8}) {
    const auto& c = modem::constellation(kind);
    std::vector<std::uint8_t> bits(c.bits_per_symbol * 40);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() % 2);
    const auto points = modem::symbol_indices(bits, c);
    std::vector<std::uint8_t> back;
    for (std::size_t p : points) {
      const auto pb = modem::bits_of_point(c, p);
      back.insert(back.end(), pb.begin(), pb.end());
    }
    CHECK(back == bits);
  }
}

TEST_CASE("modulate rejects ragged bit counts") {
  const auto& qpsk = modem::constellation(modem::ConstellationKind::qpsk);
  CHECK_THROWS_AS((void)modem::modulate(std::vector<std::uint8_t>{0, 1, 0}, qpsk), InvalidInput);
}

TEST_CASE("soft bit marginals") {
  const auto& qpsk = modem::constellation(modem::ConstellationKind::qpsk);

  const std::vector<double> uniform(4, 0.25);
  for (double m : modem::soft_bit_marginals(uniform, qpsk)) CHECK(m == doctest::Approx(0.5).epsilon(1e-12));

  // Point mass on the symbol labeled (1,0).
  std::size_t target = qpsk.point_of_label[0b10];
  std::vector<double> mass(4, 0.0);
  mass[target] = 1.0;
  const auto m = modem::soft_bit_marginals(mass, qpsk);
  CHECK(m[0] == 1.0);
  CHECK(m[1] == 0.0);

  const std::vector<double> probs{0.7, 0.1, 0.1, 0.1};
  const auto got = modem::soft_bit_marginals(probs, qpsk);
  for (std::size_t b = 0; b < 2; ++b) {
    double expect = 0.0;
    for (std::size_t p = 0; p < 4; ++p)
      if (qpsk.label_bit(p, b)) expect += probs[p];
    CHECK(got[b] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("soft bit marginals are linear and bounded") {
  const auto& psk8 = modem::constellation(modem::ConstellationKind::psk8);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(8), q(8);
  double ps = 0, qs = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    p[i] = u(rng);
    q[i] = u(rng);
    ps += p[i];
    qs += q[i];
  }
  for (std::size_t i = 0; i < 8; ++i) {
    p[i] /= ps;
    q[i] /= qs;
  }
  const double alpha = 0.3;
  std::vector<double> mix(8);
  for (std::size_t i = 0; i < 8; ++i) mix[i] = alpha * p[i] + (1 - alpha) * q[i];
  const auto mp = modem::soft_bit_marginals(p, psk8);
  const auto mq = modem::soft_bit_marginals(q, psk8);
  const auto mm = modem::soft_bit_marginals(mix, psk8);
  for (std::size_t b = 0; b < 3; ++b) {
    CHECK(mm[b] == doctest::Approx(alpha * mp[b] + (1 - alpha) * mq[b]).epsilon(1e-12));
    CHECK(mp[b] >= 0.0);
    CHECK(mp[b] <= 1.0);
  }
}

TEST_CASE("llr of soft bits") {
  CHECK(modem::llr_from_soft_bit(0.5) == 0.0);
  CHECK(modem::llr_from_soft_bit(0.7311) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(modem::llr_from_soft_bit(1.0) == 15.0);
  CHECK(modem::llr_from_soft_bit(0.0) == -15.0);
  CHECK(modem::llr_from_soft_bit(0.6) > 0.0);
  CHECK(modem::llr_from_soft_bit(0.4) < 0.0);
}

TEST_CASE("block sizes match the configured pilot and info counts") {
  const auto& qpsk = modem::constellation(modem::ConstellationKind::qpsk);
  const auto h4 = modem::exp_decay_matrix(4, 4);
  std::mt19937_64 rng(6);

  modem::BlockConfig cfg;
  cfg.users = 4;
  cfg.antennas = 4;
  cfg.constellation = &qpsk;
  cfg.pilot_count = 128;
  cfg.info_count = 15232;
  cfg.snr_db = 8.0;
  const auto blk = modem::make_block(cfg, h4, rng);
  CHECK(blk.total_count() == 15360);
  CHECK(blk.symbols.size() == 15360 * 4);
  CHECK(blk.outputs.size() == 15360 * 4);

  const auto& psk8 = modem::constellation(modem::ConstellationKind::psk8);
  cfg.constellation = &psk8;
  cfg.pilot_count = 384;
  cfg.info_count = 14976;
  const auto blk8 = modem::make_block(cfg, h4, rng);
  CHECK(blk8.pilot_count == 384);
  CHECK(blk8.info_count == 14976);
  CHECK(blk8.total_count() == 15360);
}

TEST_CASE("block generation validates its configuration") {
  const auto& qpsk = modem::constellation(modem::ConstellationKind::qpsk);
  const auto h = modem::exp_decay_matrix(2, 2);
  std::mt19937_64 rng(7);
  modem::BlockConfig cfg;
  cfg.users = 2;
  cfg.antennas = 2;
  cfg.constellation = &qpsk;
  cfg.pilot_count = 0;
  cfg.info_count = 10;
  CHECK_THROWS_AS((void)modem::make_block(cfg, h, rng), ConfigError);
  cfg.pilot_count = 10;
  const auto h3 = modem::exp_decay_matrix(3, 3);
  CHECK_THROWS_AS((void)modem::make_block(cfg, h3, rng), ConfigError);
}

TEST_CASE("coded blocks carry whole codewords with padding stripped lengths") {
  const auto hamming = code::hamming_7_4();
  const auto& psk8 = modem::constellation(modem::ConstellationKind::psk8);
  CHECK(modem::symbols_per_codeword(7, 3) == 3);
  CHECK(modem::symbols_per_codeword(128, 3) == 43);
  CHECK(modem::symbols_per_codeword(128, 2) == 64);

  const auto padded = modem::pad_codeword(std::vector<std::uint8_t>{1, 0, 1, 1, 0, 0, 1}, 3);
  CHECK(padded.size() == 9);
  CHECK(padded[7] == 0);
  CHECK(padded[8] == 0);

  modem::BlockConfig cfg;
  cfg.users = 2;
  cfg.antennas = 2;
  cfg.constellation = &psk8;
  cfg.pilot_count = 16;
  cfg.info_count = 9;  // three 3-symbol codewords
  cfg.snr_db = 10.0;
  cfg.code = &hamming;
  const auto h = modem::exp_decay_matrix(2, 2);
  std::mt19937_64 rng(8);
  const auto blk = modem::make_block(cfg, h, rng);
  CHECK(blk.codewords_per_user == 3);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(blk.message_bits[k].size() == 3 * 4);
    CHECK(blk.codeword_bits[k].size() == 3 * 7);
  }

  cfg.info_count = 10;  // not a multiple of 3 symbols
  CHECK_THROWS_AS((void)modem::make_block(cfg, h, rng), ConfigError);
}

TEST_CASE("coded info symbols re-modulate the padded codewords") {
  const auto hamming = code::hamming_7_4();
  const auto& qpsk = modem::constellation(modem::ConstellationKind::qpsk);
  modem::BlockConfig cfg;
  cfg.users = 1;
  cfg.antennas = 1;
  cfg.constellation = &qpsk;
  cfg.pilot_count = 4;
  cfg.info_count = 8;  // two 4-symbol codewords
  cfg.snr_db = 5.0;
  cfg.code = &hamming;
  const auto h = identity_channel(1);
  std::mt19937_64 rng(9);
  const auto blk = modem::make_block(cfg, h, rng);
  for (std::size_t c = 0; c < blk.codewords_per_user; ++c) {
    const std::vector<std::uint8_t> cw(blk.codeword_bits[0].begin() + 7 * c,
                                       blk.codeword_bits[0].begin() + 7 * (c + 1));
    const auto syms = modem::symbol_indices(modem::pad_codeword(cw, 2), qpsk);
    for (std::size_t i = 0; i < syms.size(); ++i) {
      CHECK(blk.symbols[(cfg.pilot_count + c * 4 + i) * cfg.users] == syms[i]);
    }
  }
}

TEST_CASE("noiseless blocks are exactly recovered by the exact posterior") {
  const double no_noise = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(10);
  for (auto kind :
       {modem::ConstellationKind::bpsk, modem::ConstellationKind::qpsk, modem::ConstellationKind::psk8}) {
    const auto& con = modem::constellation(kind);
    for (auto chan : {modem::ChannelKind::linear, modem::ChannelKind::tanh_sat}) {
      modem::BlockConfig cfg;
      cfg.users = 2;
      cfg.antennas = 2;
      cfg.constellation = &con;
      cfg.pilot_count = 10;
      cfg.info_count = 90;
      cfg.snr_db = no_noise;
      cfg.kind = chan;
      const auto h = modem::exp_decay_matrix(2, 2);
      const auto blk = modem::make_block(cfg, h, rng);
      CHECK(blk.noise_stddev == 0.0);
      for (std::size_t i = 0; i < blk.total_count(); ++i) {
        const auto post = sim::map_oracle_detect(h, blk.outputs_at(i), 0.0, con, chan);
        for (std::size_t k = 0; k < 2; ++k) {
          std::size_t best = 0;
          for (std::size_t p = 1; p < con.size(); ++p)
            if (post.marginals[k * con.size() + p] > post.marginals[k * con.size() + best]) best = p;
          CHECK(best == blk.symbols_at(i)[k]);
        }
      }
    }
  }
}

TEST_CASE("generated noise matches the configured snr") {
  const auto& qpsk = modem::constellation(modem::ConstellationKind::qpsk);
  const auto h = modem::exp_decay_matrix(2, 2);
  modem::BlockConfig cfg;
  cfg.users = 2;
  cfg.antennas = 2;
  cfg.constellation = &qpsk;
  cfg.pilot_count = 100;
  cfg.info_count = 100000;
  cfg.snr_db = 7.0;
  std::mt19937_64 rng(11);
  const auto blk = modem::make_block(cfg, h, rng);
  double power = 0.0;
  std::vector<Cx> s(2);
  for (std::size_t i = 0; i < blk.total_count(); ++i) {
    for (std::size_t k = 0; k < 2; ++k) s[k] = qpsk.points[blk.symbols_at(i)[k]];
    const auto hs = modem::mat_vec(h, s);
    for (std::size_t n = 0; n < 2; ++n) power += std::norm(blk.outputs_at(i)[n] - hs[n]);
  }
  const double noise_var = power / (2.0 * blk.total_count());  // per complex entry
  const double snr_est = 10.0 * std::log10(1.0 / noise_var);
  CHECK(std::abs(snr_est - 7.0) < 0.1);
}

TEST_CASE("channel traces round trip bit exactly") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<modem::ChannelMatrix> mats;
  for (int b = 0; b < 3; ++b) {
    modem::ChannelMatrix m;
    m.antennas = 2;
    m.users = 3;
    m.a.resize(6);
    for (auto& v : m.a) v = Cx{u(rng), u(rng)};
    mats.push_back(std::move(m));
  }
  const std::string path = "trace_roundtrip.txt";
  modem::write_channel_trace(path, mats);
  const auto loaded = modem::load_channel_trace(path);
  REQUIRE(loaded.size() == 3);
  for (std::size_t b = 0; b < 3; ++b) {
    CHECK(loaded[b].antennas == 2);
    CHECK(loaded[b].users == 3);
    for (std::size_t i = 0; i < 6; ++i) CHECK(loaded[b].a[i] == mats[b].a[i]);
  }
  std::remove(path.c_str());
}

TEST_CASE("malformed traces report the offending line") {
  const std::string path = "trace_bad.txt";
  {
    std::ofstream f(path);
    f << "2 2 1\n1,0 0,1\n1,0 broken\n";
  }
  try {
    (void)modem::load_channel_trace(path);
    CHECK(false);
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS((void)modem::load_channel_trace("missing_trace.txt"), IoError);
}
