#include "code/tanner.hpp"

namespace bayesrx::code {

TannerGraph tanner_graph(const BitMatrix& parity_check) {
  TannerGraph g;
  g.var_count = parity_check.cols;
  g.check_count = parity_check.rows;
  g.var_edges.resize(g.var_count);
  g.check_edges.resize(g.check_count);
  for (std::size_t h = 0; h < parity_check.rows; ++h) {
    for (std::size_t v = 0; v < parity_check.cols; ++v) {
      if (!parity_check.at(h, v)) continue;
      const std::size_t e = g.edge_var.size();
      g.edge_var.push_back(v);
      g.edge_check.push_back(h);
      g.var_edges[v].push_back(e);
      g.check_edges[h].push_back(e);
    }
  }
  return g;
}

}  // namespace bayesrx::code
