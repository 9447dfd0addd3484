#include "code/gf2.hpp"

#include "common/errors.hpp"

namespace bayesrx::code {

BitMatrix gf2_multiply(const BitMatrix& x, const BitMatrix& y) {
  if (x.cols != y.rows) throw InvalidInput("gf2 multiply shape mismatch");
  BitMatrix out(x.rows, y.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t k = 0; k < x.cols; ++k) {
      if (!x.at(r, k)) continue;
      for (std::size_t c = 0; c < y.cols; ++c) out.at(r, c) ^= y.at(k, c);
    }
  }
  return out;
}

std::vector<std::uint8_t> gf2_mat_vec(const BitMatrix& m, std::span<const std::uint8_t> v) {
  if (v.size() != m.cols) throw InvalidInput("gf2 matvec shape mismatch");
  std::vector<std::uint8_t> out(m.rows, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::uint8_t acc = 0;
    for (std::size_t c = 0; c < m.cols; ++c) acc ^= static_cast<std::uint8_t>(m.at(r, c) & v[c]);
    out[r] = acc;
  }
  return out;
}

BitMatrix gf2_transpose(const BitMatrix& m) {
  BitMatrix out(m.cols, m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) out.at(c, r) = m.at(r, c);
  }
  return out;
}

namespace {

// Row reduction; returns pivot column per pivot row, matrix ends in RREF.
std::vector<std::size_t> reduce(BitMatrix& m) {
  std::vector<std::size_t> pivots;
  std::size_t row = 0;
  for (std::size_t col = 0; col < m.cols && row < m.rows; ++col) {
    std::size_t pivot = row;
    while (pivot < m.rows && !m.at(pivot, col)) ++pivot;
    if (pivot == m.rows) continue;
    if (pivot != row) {
      for (std::size_t c = 0; c < m.cols; ++c) std::swap(m.at(pivot, c), m.at(row, c));
    }
    for (std::size_t r = 0; r < m.rows; ++r) {
      if (r != row && m.at(r, col)) {
        for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) ^= m.at(row, c);
      }
    }
    pivots.push_back(col);
    ++row;
  }
  return pivots;
}

}  // namespace

std::size_t gf2_rank(BitMatrix m) { return reduce(m).size(); }

BitMatrix gf2_null_space(const BitMatrix& m) {
  BitMatrix r = m;
  const auto pivots = reduce(r);
  std::vector<bool> is_pivot(m.cols, false);
  for (std::size_t c : pivots) is_pivot[c] = true;

  std::vector<std::size_t> free_cols;
  for (std::size_t c = 0; c < m.cols; ++c) {
    if (!is_pivot[c]) free_cols.push_back(c);
  }

  BitMatrix basis(free_cols.size(), m.cols);
  for (std::size_t i = 0; i < free_cols.size(); ++i) {
    const std::size_t fc = free_cols[i];
    basis.at(i, fc) = 1;
    for (std::size_t p = 0; p < pivots.size(); ++p) {
      basis.at(i, pivots[p]) = r.at(p, fc);
    }
  }
  return basis;
}

BitMatrix gf2_left_inverse(const BitMatrix& m) {
  // Augment [m | I], reduce; pivot rows of the identity part give the
  // functionals mapping m*x back to x.
  BitMatrix aug(m.rows, m.cols + m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) aug.at(r, c) = m.at(r, c);
    aug.at(r, m.cols + r) = 1;
  }
  std::vector<std::size_t> pivots;
  std::size_t row = 0;
  for (std::size_t col = 0; col < m.cols && row < aug.rows; ++col) {
    std::size_t pivot = row;
    while (pivot < aug.rows && !aug.at(pivot, col)) ++pivot;
    if (pivot == aug.rows) continue;
    if (pivot != row) {
      for (std::size_t c = 0; c < aug.cols; ++c) std::swap(aug.at(pivot, c), aug.at(row, c));
    }
    for (std::size_t r = 0; r < aug.rows; ++r) {
      if (r != row && aug.at(r, col)) {
        for (std::size_t c = 0; c < aug.cols; ++c) aug.at(r, c) ^= aug.at(row, c);
      }
    }
    pivots.push_back(col);
    ++row;
  }
  if (pivots.size() != m.cols) throw InvalidInput("matrix does not have full column rank");
  BitMatrix inv(m.cols, m.rows);
  for (std::size_t p = 0; p < pivots.size(); ++p) {
    // After reduction row p has e_{pivots[p]} in the left part; pivots
    // appear in increasing column order, so row p corresponds to x_p.
    for (std::size_t c = 0; c < m.rows; ++c) inv.at(p, c) = aug.at(p, m.cols + c);
  }
  return inv;
}

}  // namespace bayesrx::code
