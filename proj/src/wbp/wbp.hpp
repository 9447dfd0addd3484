#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "code/tanner.hpp"

namespace bayesrx::wbp {

// Clip for check-node products before arctanh; tanh outputs are clamped to
// the same bound so message magnitudes stay strictly below one.
inline constexpr double kMessageClip = 1.0 - 1e-7;

// One weight per (iteration, edge), edge order as in the Tanner graph.
struct WbpParams {
  std::size_t iterations = 0;
  std::vector<std::vector<double>> weights;  // [q][edge]
};

WbpParams unit_weights(const code::TannerGraph& g, std::size_t iterations);

// Variational posterior: nominal weights plus one drop logit per weight.
struct WbpPosterior {
  WbpParams nominal;
  std::vector<std::vector<double>> logits;  // [q][edge]
  double prior_stddev = 1.0;
  double temperature = 0.1;
};

WbpPosterior make_wbp_posterior(WbpParams nominal, double init_drop_prob);

// Weighted flooding BP. Per iteration q (messages init to zero):
//   M_vc = tanh((llr[v] + sum_{h' != h} w_q M_cv) / 2)
//   M_cv = 2 atanh(clip(prod_{v' != v} M_vc))
// Final soft output reuses the iteration-Q weights on the last check
// messages. Returns one soft value in (-1,1) per variable.
std::vector<double> wbp_infer(const WbpParams& params, std::span<const double> llr,
                              const code::TannerGraph& g);

// Vanilla BP: all weights one.
std::vector<double> bp_infer(std::span<const double> llr, const code::TannerGraph& g,
                             std::size_t iterations);

// Ensemble of hard weight realizations, member j of iteration q drawn from
// seed hash(base_seed, q, j); outputs averaged.
std::vector<double> bayesian_wbp_infer(const WbpPosterior& post, std::span<const double> llr,
                                       const code::TannerGraph& g, std::size_t ensemble,
                                       std::uint64_t base_seed);

// Ensemble inside each iteration: variable-to-check messages are averaged
// over J realizations of that iteration's weights, the unweighted check
// update runs once on the average; the final marginalization averages over
// the last iteration's realizations.
std::vector<double> modular_bayesian_wbp_infer(const WbpPosterior& post,
                                               std::span<const double> llr,
                                               const code::TannerGraph& g, std::size_t ensemble,
                                               std::uint64_t base_seed);

// bit = 1 iff soft value > 0 (soft value is 2 P(bit=1) - 1, ties to 0).
std::vector<std::uint8_t> hard_decide(std::span<const double> soft);

void save_wbp(const WbpParams& params, const std::string& path);
WbpParams load_wbp(const std::string& path, std::size_t iterations, std::size_t edges);
void save_wbp_posterior(const WbpPosterior& post, const std::string& path);
WbpPosterior load_wbp_posterior(const std::string& path, std::size_t iterations, std::size_t edges);

// Internal building blocks, shared with training and exposed for tests.
namespace detail {
// A_e = llr[v] + sum over v's other edges of w * M_cv; returns clamped tanh(A/2).
void var_to_check(std::span<const double> llr, std::span<const double> w,
                  std::span<const double> m_cv, const code::TannerGraph& g,
                  std::span<double> m_vc_out);
// Exclusive products in sign/log-magnitude form; products clipped, then
// M_cv = 2 atanh(product).
void check_to_var(std::span<const double> m_vc, const code::TannerGraph& g,
                  std::span<double> prod_out, std::span<double> m_cv_out);
// Clamped tanh((llr + sum w*M_cv)/2) per variable.
void marginalize(std::span<const double> llr, std::span<const double> w,
                 std::span<const double> m_cv, const code::TannerGraph& g,
                 std::span<double> soft_out);
// Hard Bernoulli(sigmoid(logit)) drops applied to one iteration's weights.
std::vector<double> realize_weights(const WbpPosterior& post, std::size_t q, std::uint64_t seed);
}  // namespace detail

}  // namespace bayesrx::wbp
