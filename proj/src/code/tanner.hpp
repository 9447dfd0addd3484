#pragma once

#include <vector>

#include "code/gf2.hpp"

namespace bayesrx::code {

// Bipartite variable/check graph of a parity-check matrix. Edges are indexed
// in row-major order of the matrix (check-major), which fixes the layout of
// per-edge decoder weights.
struct TannerGraph {
  std::size_t var_count = 0;
  std::size_t check_count = 0;
  std::vector<std::size_t> edge_var;    // per edge
  std::vector<std::size_t> edge_check;  // per edge
  std::vector<std::vector<std::size_t>> var_edges;
  std::vector<std::vector<std::size_t>> check_edges;

  std::size_t edge_count() const { return edge_var.size(); }
};

TannerGraph tanner_graph(const BitMatrix& parity_check);

}  // namespace bayesrx::code
