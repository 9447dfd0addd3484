#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bayesrx::code {

// Dense GF(2) matrix, one byte per entry. Sizes here top out around
// 128 columns, so bit packing is not worth the complexity.
struct BitMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> a;

  BitMatrix() = default;
  BitMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0) {}

  std::uint8_t& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

BitMatrix gf2_multiply(const BitMatrix& x, const BitMatrix& y);
std::vector<std::uint8_t> gf2_mat_vec(const BitMatrix& m, std::span<const std::uint8_t> v);
BitMatrix gf2_transpose(const BitMatrix& m);
std::size_t gf2_rank(BitMatrix m);

// Rows form a basis of { x : m x = 0 }. Empty matrix (0 rows) when the
// null space is trivial.
BitMatrix gf2_null_space(const BitMatrix& m);

// Left inverse of a full-column-rank matrix: result * m = identity.
BitMatrix gf2_left_inverse(const BitMatrix& m);

}  // namespace bayesrx::code
