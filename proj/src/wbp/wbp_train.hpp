#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wbp/wbp.hpp"

namespace bayesrx::wbp {

// One training example: channel LLRs and the transmitted codeword bits.
struct WbpFrame {
  std::vector<double> llr;
  std::vector<std::uint8_t> bits;
};

struct WbpTrainOptions {
  std::size_t adam_steps = 500;
  double lr = 1e-3;
  double beta = 1e4;
  std::size_t ensemble = 3;  // teacher-forcing ensemble for the modular variant
  double init_drop_prob = 0.1;
  double temperature = 0.1;
  double prior_stddev = 1.0;
  std::uint64_t seed = 0;
  std::vector<double>* loss_trace = nullptr;  // per-step data loss, optional
};

// Multi-loss: sum over iterations of the bitwise cross-entropy of the
// per-iteration soft outputs, P(bit=1) = (1 + soft)/2, averaged over
// variables and frames. Weights start at one.
WbpParams train_wbp(const code::TannerGraph& g, std::size_t iterations,
                    std::span<const WbpFrame> frames, const WbpTrainOptions& opts);

// Free energy over all iterations' weights jointly: expected multi-loss
// under concrete dropout (one draw per step) plus (1/beta) KL.
WbpPosterior train_wbp_bayesian(const code::TannerGraph& g, std::size_t iterations,
                                std::span<const WbpFrame> frames, const WbpTrainOptions& opts);

// Per-iteration posteriors trained in sequence; iteration q sees check
// messages produced by the ensembled, already-trained iterations before it.
WbpPosterior train_wbp_modular_bayesian(const code::TannerGraph& g, std::size_t iterations,
                                        std::span<const WbpFrame> frames,
                                        const WbpTrainOptions& opts);

// Loss/gradient evaluators, exposed so tests can finite-difference them.
struct WbpLossGrads {
  double loss = 0.0;                          // data term only
  double kl = 0.0;                            // regularizer (bayesian paths)
  std::vector<std::vector<double>> dweights;  // [q][edge]
  std::vector<std::vector<double>> dlogits;   // [q][edge], bayesian paths
};

WbpLossGrads wbp_multiloss_grads(const code::TannerGraph& g, const WbpParams& params,
                                 std::span<const WbpFrame> frames);

// `uniforms` are the concrete-relaxation draws, one per (iteration, edge).
WbpLossGrads wbp_bayesian_loss_grads(const code::TannerGraph& g, const WbpPosterior& post,
                                     const std::vector<std::vector<double>>& uniforms,
                                     std::span<const WbpFrame> frames, double beta);

// Single-iteration module loss against fixed incoming check messages.
WbpLossGrads wbp_module_loss_grads(const code::TannerGraph& g, std::span<const double> weights,
                                   std::span<const double> logits,
                                   std::span<const double> uniforms, double temperature,
                                   double prior_stddev,
                                   std::span<const std::vector<double>> teacher_mcv,
                                   std::span<const WbpFrame> frames, double beta);

}  // namespace bayesrx::wbp
