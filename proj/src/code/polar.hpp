#pragma once

#include <span>
#include <string>
#include <vector>

#include "code/gf2.hpp"

namespace bayesrx::code {

// Linear block code description: generator (message_length x block_length),
// parity check (null-space basis of the generator), and a precomputed
// pseudo-inverse for message recovery from codeword bits.
struct CodeSpec {
  std::size_t block_length = 0;
  std::size_t message_length = 0;
  BitMatrix generator;
  BitMatrix parity_check;
  std::vector<std::size_t> frozen;  // polar only, sorted
  BitMatrix recovery;               // message = recovery * codeword
};

// Polar code: generator rows are rows of the n-fold Kronecker power of
// [[1,0],[1,1]] at the non-frozen indices. The frozen set comes from the
// erasure-probability recursion (children 2z - z^2 and z^2) seeded with
// the design erasure probability; ties break toward the lower index.
CodeSpec build_polar_code(std::size_t block_length, std::size_t message_length,
                          double design_erasure = 0.5);

// Textbook (7,4) Hamming code in systematic [I | A] form.
CodeSpec hamming_7_4();

std::vector<std::uint8_t> encode(const CodeSpec& code, std::span<const std::uint8_t> message);

struct RecoveryResult {
  std::vector<std::uint8_t> message;
  bool codeword = false;  // parity checks all satisfied
};
RecoveryResult message_bit_recovery(const CodeSpec& code, std::span<const std::uint8_t> bits);

// Plain-text export: dimensions line, generator rows, parity-check rows.
void export_code_spec(const CodeSpec& code, const std::string& path);

}  // namespace bayesrx::code
