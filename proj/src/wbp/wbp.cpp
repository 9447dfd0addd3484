#include "wbp/wbp.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "common/errors.hpp"
#include "common/seeds.hpp"

namespace bayesrx::wbp {

namespace {

double clamp_msg(double x) {
  if (x > kMessageClip) return kMessageClip;
  if (x < -kMessageClip) return -kMessageClip;
  return x;
}

void check_sizes(const WbpParams& p, const code::TannerGraph& g) {
  if (p.weights.size() != p.iterations) throw InvalidInput("weight rows != iterations");
  for (const auto& w : p.weights) {
    if (w.size() != g.edge_count()) throw InvalidInput("weight row size != edge count");
  }
}

}  // namespace

WbpParams unit_weights(const code::TannerGraph& g, std::size_t iterations) {
  WbpParams p;
  p.iterations = iterations;
  p.weights.assign(iterations, std::vector<double>(g.edge_count(), 1.0));
  return p;
}

WbpPosterior make_wbp_posterior(WbpParams nominal, double init_drop_prob) {
  if (init_drop_prob <= 0.0 || init_drop_prob >= 1.0) {
    throw InvalidInput("initial drop probability must lie in (0,1)");
  }
  WbpPosterior post;
  const double logit = std::log(init_drop_prob / (1.0 - init_drop_prob));
  post.logits.assign(nominal.iterations,
                     std::vector<double>(nominal.weights.empty() ? 0 : nominal.weights[0].size(), logit));
  post.nominal = std::move(nominal);
  return post;
}

namespace detail {

void var_to_check(std::span<const double> llr, std::span<const double> w,
                  std::span<const double> m_cv, const code::TannerGraph& g,
                  std::span<double> m_vc_out) {
  for (std::size_t v = 0; v < g.var_count; ++v) {
    double total = llr[v];
    for (std::size_t e : g.var_edges[v]) total += w[e] * m_cv[e];
    for (std::size_t e : g.var_edges[v]) {
      const double a = total - w[e] * m_cv[e];
      m_vc_out[e] = clamp_msg(std::tanh(0.5 * a));
    }
  }
}

void check_to_var(std::span<const double> m_vc, const code::TannerGraph& g,
                  std::span<double> prod_out, std::span<double> m_cv_out) {
  for (std::size_t h = 0; h < g.check_count; ++h) {
    const auto& edges = g.check_edges[h];
    std::size_t zeros = 0;
    std::size_t negs = 0;
    double logmag = 0.0;
    for (std::size_t e : edges) {
      const double m = m_vc[e];
      if (m == 0.0) {
        ++zeros;
      } else {
        if (m < 0.0) ++negs;
        logmag += std::log(std::abs(m));
      }
    }
    for (std::size_t e : edges) {
      const double m = m_vc[e];
      double prod;
      if (zeros > (m == 0.0 ? 1u : 0u)) {
        prod = 0.0;
      } else if (zeros == 1 && m != 0.0) {
        prod = 0.0;
      } else {
        const double lm = m == 0.0 ? logmag : logmag - std::log(std::abs(m));
        const std::size_t n = m < 0.0 ? negs - 1 : negs;
        prod = (n % 2 ? -1.0 : 1.0) * std::exp(lm);
      }
      prod = clamp_msg(prod);
      prod_out[e] = prod;
      m_cv_out[e] = 2.0 * std::atanh(prod);
    }
  }
}

void marginalize(std::span<const double> llr, std::span<const double> w,
                 std::span<const double> m_cv, const code::TannerGraph& g,
                 std::span<double> soft_out) {
  for (std::size_t v = 0; v < g.var_count; ++v) {
    double total = llr[v];
    for (std::size_t e : g.var_edges[v]) total += w[e] * m_cv[e];
    soft_out[v] = clamp_msg(std::tanh(0.5 * total));
  }
}

std::vector<double> realize_weights(const WbpPosterior& post, std::size_t q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> w = post.nominal.weights[q];
  for (std::size_t e = 0; e < w.size(); ++e) {
    const double p = 1.0 / (1.0 + std::exp(-post.logits[q][e]));
    if (uni(rng) < p) w[e] = 0.0;
  }
  return w;
}

}  // namespace detail

namespace {

std::vector<double> run_bp(std::span<const std::vector<double>> weights,
                           std::span<const double> llr, const code::TannerGraph& g) {
  const std::size_t edges = g.edge_count();
  const std::size_t iters = weights.size();
  std::vector<double> m_cv(edges, 0.0), m_vc(edges, 0.0), prod(edges, 0.0);
  for (std::size_t q = 0; q < iters; ++q) {
    detail::var_to_check(llr, weights[q], m_cv, g, m_vc);
    detail::check_to_var(m_vc, g, prod, m_cv);
  }
  std::vector<double> soft(g.var_count);
  detail::marginalize(llr, weights[iters - 1], m_cv, g, soft);
  return soft;
}

}  // namespace

std::vector<double> wbp_infer(const WbpParams& params, std::span<const double> llr,
                              const code::TannerGraph& g) {
  check_sizes(params, g);
  if (llr.size() != g.var_count) throw InvalidInput("llr length != variable count");
  if (params.iterations == 0) throw InvalidInput("need at least one iteration");
  return run_bp(params.weights, llr, g);
}

std::vector<double> bp_infer(std::span<const double> llr, const code::TannerGraph& g,
                             std::size_t iterations) {
  return wbp_infer(unit_weights(g, iterations), llr, g);
}

std::vector<double> bayesian_wbp_infer(const WbpPosterior& post, std::span<const double> llr,
                                       const code::TannerGraph& g, std::size_t ensemble,
                                       std::uint64_t base_seed) {
  if (ensemble == 0) throw InvalidInput("ensemble size must be positive");
  const std::size_t iters = post.nominal.iterations;
  std::vector<double> acc(g.var_count, 0.0);
  std::vector<std::vector<double>> w(iters);
  for (std::size_t j = 0; j < ensemble; ++j) {
    for (std::size_t q = 0; q < iters; ++q) {
      w[q] = detail::realize_weights(post, q, derive_seed(base_seed, "wbp_member", {q, j}));
    }
    const auto soft = run_bp(w, llr, g);
    for (std::size_t v = 0; v < g.var_count; ++v) acc[v] += soft[v];
  }
  for (auto& x : acc) x /= static_cast<double>(ensemble);
  return acc;
}

std::vector<double> modular_bayesian_wbp_infer(const WbpPosterior& post,
                                               std::span<const double> llr,
                                               const code::TannerGraph& g, std::size_t ensemble,
                                               std::uint64_t base_seed) {
  if (ensemble == 0) throw InvalidInput("ensemble size must be positive");
  const std::size_t iters = post.nominal.iterations;
  const std::size_t edges = g.edge_count();
  if (iters == 0) throw InvalidInput("need at least one iteration");

  std::vector<double> m_cv(edges, 0.0), m_vc(edges, 0.0), avg_vc(edges, 0.0), prod(edges, 0.0);
  std::vector<std::vector<double>> members(ensemble);
  for (std::size_t q = 0; q < iters; ++q) {
    avg_vc.assign(edges, 0.0);
    for (std::size_t j = 0; j < ensemble; ++j) {
      members[j] = detail::realize_weights(post, q, derive_seed(base_seed, "wbp_member", {q, j}));
      detail::var_to_check(llr, members[j], m_cv, g, m_vc);
      for (std::size_t e = 0; e < edges; ++e) avg_vc[e] += m_vc[e];
    }
    for (std::size_t e = 0; e < edges; ++e) avg_vc[e] /= static_cast<double>(ensemble);
    detail::check_to_var(avg_vc, g, prod, m_cv);
  }

  // Final marginalization, averaged over the last iteration's realizations.
  std::vector<double> acc(g.var_count, 0.0), soft(g.var_count);
  for (std::size_t j = 0; j < ensemble; ++j) {
    detail::marginalize(llr, members[j], m_cv, g, soft);
    for (std::size_t v = 0; v < g.var_count; ++v) acc[v] += soft[v];
  }
  for (auto& x : acc) x /= static_cast<double>(ensemble);
  return acc;
}

std::vector<std::uint8_t> hard_decide(std::span<const double> soft) {
  std::vector<std::uint8_t> bits(soft.size());
  for (std::size_t v = 0; v < soft.size(); ++v) bits[v] = soft[v] > 0.0 ? 1 : 0;
  return bits;
}

void save_wbp(const WbpParams& params, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for write: " + path);
  f.precision(17);
  for (const auto& row : params.weights) {
    for (std::size_t e = 0; e < row.size(); ++e) f << (e ? " " : "") << row[e];
    f << '\n';
  }
  if (!f) throw IoError("write failed: " + path);
}

namespace {

std::vector<double> parse_row(const std::string& line, std::size_t edges, const std::string& path) {
  std::istringstream is(line);
  std::vector<double> row(edges);
  for (std::size_t e = 0; e < edges; ++e) {
    if (!(is >> row[e])) throw IoError("decoder snapshot truncated row: " + path);
  }
  double extra;
  if (is >> extra) throw IoError("decoder snapshot row too long: " + path);
  return row;
}

std::vector<std::vector<double>> load_rows(const std::string& path, std::size_t rows,
                                           std::size_t edges) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open decoder snapshot: " + path);
  std::vector<std::vector<double>> out;
  std::string line;
  while (out.size() < rows && std::getline(f, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_row(line, edges, path));
  }
  if (out.size() != rows) throw IoError("decoder snapshot has too few rows: " + path);
  while (std::getline(f, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw IoError("decoder snapshot has extra rows: " + path);
    }
  }
  return out;
}

}  // namespace

WbpParams load_wbp(const std::string& path, std::size_t iterations, std::size_t edges) {
  WbpParams p;
  p.iterations = iterations;
  p.weights = load_rows(path, iterations, edges);
  return p;
}

void save_wbp_posterior(const WbpPosterior& post, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for write: " + path);
  f.precision(17);
  for (std::size_t q = 0; q < post.nominal.iterations; ++q) {
    for (std::size_t e = 0; e < post.nominal.weights[q].size(); ++e) {
      f << (e ? " " : "") << post.nominal.weights[q][e];
    }
    f << '\n';
    for (std::size_t e = 0; e < post.logits[q].size(); ++e) {
      f << (e ? " " : "") << post.logits[q][e];
    }
    f << '\n';
  }
  if (!f) throw IoError("write failed: " + path);
}

WbpPosterior load_wbp_posterior(const std::string& path, std::size_t iterations,
                                std::size_t edges) {
  const auto rows = load_rows(path, iterations * 2, edges);
  WbpPosterior post;
  post.nominal.iterations = iterations;
  for (std::size_t q = 0; q < iterations; ++q) {
    post.nominal.weights.push_back(rows[2 * q]);
    post.logits.push_back(rows[2 * q + 1]);
  }
  return post;
}

}  // namespace bayesrx::wbp
