#include "modem/channel.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "common/errors.hpp"

namespace bayesrx::modem {

ChannelMatrix exp_decay_matrix(std::size_t antennas, std::size_t users) {
  ChannelMatrix h;
  h.antennas = antennas;
  h.users = users;
  h.a.resize(antennas * users);
  for (std::size_t n = 0; n < antennas; ++n) {
    for (std::size_t k = 0; k < users; ++k) {
      const double d = n > k ? static_cast<double>(n - k) : static_cast<double>(k - n);
      h.at(n, k) = Cx(std::exp(-d), 0.0);
    }
  }
  return h;
}

double sigma_from_snr_db(double snr_db) {
  return std::sqrt(std::pow(10.0, -snr_db / 10.0) / 2.0);
}

std::vector<Cx> mat_vec(const ChannelMatrix& h, std::span<const Cx> s) {
  if (s.size() != h.users) throw InvalidInput("symbol vector length != user count");
  std::vector<Cx> y(h.antennas);
  for (std::size_t n = 0; n < h.antennas; ++n) {
    Cx acc(0.0, 0.0);
    for (std::size_t k = 0; k < h.users; ++k) acc += h.at(n, k) * s[k];
    y[n] = acc;
  }
  return y;
}

std::vector<Cx> apply_linear_channel(const ChannelMatrix& h, std::span<const Cx> s,
                                     double sigma, std::mt19937_64& rng) {
  if (sigma < 0.0) throw InvalidInput("negative noise stddev");
  auto y = mat_vec(h, s);
  if (sigma > 0.0) {
    std::normal_distribution<double> g(0.0, sigma);
    for (auto& v : y) {
      const double re = g(rng);
      const double im = g(rng);
      v += Cx(re, im);
    }
  }
  return y;
}

std::vector<Cx> apply_tanh_channel(const ChannelMatrix& h, std::span<const Cx> s,
                                   double sigma, std::mt19937_64& rng) {
  if (sigma < 0.0) throw InvalidInput("negative noise stddev");
  auto y = mat_vec(h, s);
  std::normal_distribution<double> g(0.0, sigma);
  for (auto& v : y) {
    double re = 0.5 * v.real();
    double im = 0.5 * v.imag();
    if (sigma > 0.0) {
      re += g(rng);
      im += g(rng);
    }
    v = Cx(std::tanh(re), std::tanh(im));
  }
  return y;
}

namespace {

Cx parse_entry(const std::string& tok, std::size_t line_no) {
  const auto comma = tok.find(',');
  if (comma == std::string::npos) {
    throw IoError("channel trace line " + std::to_string(line_no) + ": expected re,im entry");
  }
  char* end = nullptr;
  const std::string res = tok.substr(0, comma);
  const std::string ims = tok.substr(comma + 1);
  const double re = std::strtod(res.c_str(), &end);
  if (end == res.c_str() || *end != '\0') {
    throw IoError("channel trace line " + std::to_string(line_no) + ": bad real part '" + res + "'");
  }
  const double im = std::strtod(ims.c_str(), &end);
  if (end == ims.c_str() || *end != '\0') {
    throw IoError("channel trace line " + std::to_string(line_no) + ": bad imag part '" + ims + "'");
  }
  return Cx(re, im);
}

}  // namespace

std::vector<ChannelMatrix> load_channel_trace(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open channel trace: " + path);
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&]() -> bool {
    while (std::getline(f, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };

  if (!next_line()) throw IoError("channel trace is empty: " + path);
  std::istringstream hdr(line);
  long n = 0, k = 0, b = 0;
  if (!(hdr >> n >> k >> b) || n <= 0 || k <= 0 || b <= 0) {
    throw IoError("channel trace line " + std::to_string(line_no) + ": bad header (want N K B)");
  }

  std::vector<ChannelMatrix> mats;
  mats.reserve(static_cast<std::size_t>(b));
  for (long blk = 0; blk < b; ++blk) {
    ChannelMatrix m;
    m.antennas = static_cast<std::size_t>(n);
    m.users = static_cast<std::size_t>(k);
    m.a.resize(m.antennas * m.users);
    for (std::size_t row = 0; row < m.antennas; ++row) {
      if (!next_line()) {
        throw IoError("channel trace ends early at line " + std::to_string(line_no));
      }
      std::istringstream is(line);
      std::string tok;
      for (std::size_t col = 0; col < m.users; ++col) {
        if (!(is >> tok)) {
          throw IoError("channel trace line " + std::to_string(line_no) + ": expected " +
                        std::to_string(k) + " entries");
        }
        m.at(row, col) = parse_entry(tok, line_no);
      }
      std::string extra;
      if (is >> extra) {
        throw IoError("channel trace line " + std::to_string(line_no) + ": trailing tokens");
      }
    }
    mats.push_back(std::move(m));
  }
  return mats;
}

void write_channel_trace(const std::string& path, std::span<const ChannelMatrix> mats) {
  if (mats.empty()) throw InvalidInput("no matrices to write");
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for write: " + path);
  f.precision(17);
  f << mats[0].antennas << ' ' << mats[0].users << ' ' << mats.size() << '\n';
  for (const auto& m : mats) {
    for (std::size_t row = 0; row < m.antennas; ++row) {
      for (std::size_t col = 0; col < m.users; ++col) {
        if (col) f << ' ';
        f << m.at(row, col).real() << ',' << m.at(row, col).imag();
      }
      f << '\n';
    }
  }
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace bayesrx::modem
