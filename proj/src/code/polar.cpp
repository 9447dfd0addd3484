#include "code/polar.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "common/errors.hpp"

namespace bayesrx::code {

namespace {

bool is_pow2(std::size_t x) { return x != 0 && (x & (x - 1)) == 0; }

// Kronecker-power entry: row i of [[1,0],[1,1]]^{x n} has a one in column j
// exactly when the support of j is contained in the support of i.
inline std::uint8_t kron_entry(std::size_t i, std::size_t j) {
  return static_cast<std::uint8_t>(((i & j) == j) ? 1 : 0);
}

void finish_code(CodeSpec& code) {
  code.parity_check = gf2_null_space(code.generator);
  code.recovery = gf2_left_inverse(gf2_transpose(code.generator));
}

}  // namespace

CodeSpec build_polar_code(std::size_t block_length, std::size_t message_length,
                          double design_erasure) {
  if (!is_pow2(block_length)) throw InvalidInput("polar block length must be a power of two");
  if (message_length == 0 || message_length > block_length) {
    throw InvalidInput("message length out of range");
  }
  if (!(design_erasure > 0.0 && design_erasure < 1.0)) {
    throw InvalidInput("design erasure probability must lie in (0,1)");
  }

  std::size_t n_bits = 0;
  while ((std::size_t{1} << n_bits) < block_length) ++n_bits;

  // Erasure probability of each synthetic channel, bits of the index walked
  // from the most significant: 0 -> degraded (2z - z^2), 1 -> upgraded (z^2).
  std::vector<double> z(block_length);
  for (std::size_t i = 0; i < block_length; ++i) {
    double zi = design_erasure;
    for (std::size_t b = n_bits; b-- > 0;) {
      zi = (i >> b) & 1 ? zi * zi : 2.0 * zi - zi * zi;
    }
    z[i] = zi;
  }

  std::vector<std::size_t> order(block_length);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });

  std::vector<std::size_t> info(order.begin(), order.begin() + message_length);
  std::sort(info.begin(), info.end());

  CodeSpec code;
  code.block_length = block_length;
  code.message_length = message_length;
  code.frozen.assign(order.begin() + message_length, order.end());
  std::sort(code.frozen.begin(), code.frozen.end());

  code.generator = BitMatrix(message_length, block_length);
  for (std::size_t r = 0; r < message_length; ++r) {
    for (std::size_t j = 0; j < block_length; ++j) {
      code.generator.at(r, j) = kron_entry(info[r], j);
    }
  }
  finish_code(code);
  return code;
}

CodeSpec hamming_7_4() {
  CodeSpec code;
  code.block_length = 7;
  code.message_length = 4;
  const std::uint8_t g[4][7] = {
      {1, 0, 0, 0, 1, 1, 0},
      {0, 1, 0, 0, 1, 0, 1},
      {0, 0, 1, 0, 0, 1, 1},
      {0, 0, 0, 1, 1, 1, 1},
  };
  const std::uint8_t h[3][7] = {
      {1, 1, 0, 1, 1, 0, 0},
      {1, 0, 1, 1, 0, 1, 0},
      {0, 1, 1, 1, 0, 0, 1},
  };
  code.generator = BitMatrix(4, 7);
  code.parity_check = BitMatrix(3, 7);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 7; ++c) code.generator.at(r, c) = g[r][c];
  }
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 7; ++c) code.parity_check.at(r, c) = h[r][c];
  }
  code.recovery = gf2_left_inverse(gf2_transpose(code.generator));
  return code;
}

std::vector<std::uint8_t> encode(const CodeSpec& code, std::span<const std::uint8_t> message) {
  if (message.size() != code.message_length) throw InvalidInput("message length mismatch");
  std::vector<std::uint8_t> cw(code.block_length, 0);
  for (std::size_t r = 0; r < code.message_length; ++r) {
    if (message[r] > 1) throw InvalidInput("non-binary message bit");
    if (!message[r]) continue;
    for (std::size_t j = 0; j < code.block_length; ++j) cw[j] ^= code.generator.at(r, j);
  }
  return cw;
}

RecoveryResult message_bit_recovery(const CodeSpec& code, std::span<const std::uint8_t> bits) {
  if (bits.size() != code.block_length) throw InvalidInput("codeword length mismatch");
  RecoveryResult res;
  res.message = gf2_mat_vec(code.recovery, bits);
  const auto syndrome = gf2_mat_vec(code.parity_check, bits);
  res.codeword = std::all_of(syndrome.begin(), syndrome.end(),
                             [](std::uint8_t b) { return b == 0; });
  return res;
}

void export_code_spec(const CodeSpec& code, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for write: " + path);
  f << code.block_length << ' ' << code.message_length << '\n';
  auto put_rows = [&](const BitMatrix& m) {
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t c = 0; c < m.cols; ++c) f << static_cast<int>(m.at(r, c));
      f << '\n';
    }
  };
  put_rows(code.generator);
  put_rows(code.parity_check);
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace bayesrx::code
