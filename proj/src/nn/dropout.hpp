#pragma once

#include <random>
#include <span>
#include <vector>

#include "nn/mlp.hpp"

namespace bayesrx::nn {

inline constexpr double kDefaultDropProb = 0.1;
inline constexpr double kConcreteTemperature = 0.1;

// Variational dropout posterior over one classifier: nominal parameters plus
// one drop logit per hidden unit (drop probability sigmoid(logit)).
struct DropoutPosterior {
  NetworkParams nominal;
  std::vector<double> dropout_logits;
  double prior_stddev = 1.0;
  double temperature = kConcreteTemperature;
};

DropoutPosterior make_posterior(NetworkParams nominal, double init_drop_prob = kDefaultDropProb);
// Drop probabilities forced to exactly zero (logits -inf); sampling from this
// posterior reproduces the nominal network bit for bit.
DropoutPosterior point_mass_posterior(NetworkParams nominal);

// Relaxed Bernoulli draw; approaches a hard threshold at u = sigmoid(-logit)
// as temperature -> 0. Throws on u outside (0,1).
double concrete_mask(double logit, double uniform_draw, double temperature);

// Training-time multipliers: mask[i] = 1 - concrete_mask(logit_i, u_i, T).
// Draw order is hidden units in layer order. `z_out` receives the raw
// concrete draws (needed to chain gradients into the logits).
void sample_soft_masks(const DropoutPosterior& post, std::mt19937_64& rng,
                       std::span<double> mask_out, std::span<double> z_out);

// Inference-time hard masks, 0 = dropped, drawn Bernoulli(sigmoid(logit)).
void sample_hard_masks(const DropoutPosterior& post, std::mt19937_64& rng,
                       std::span<double> mask_out);

// Nominal parameters with each dropped unit's outgoing weight column zeroed.
// Forwarding the result equals masking activations with the same draw.
NetworkParams sample_dropout_realization(const DropoutPosterior& post, std::mt19937_64& rng);

struct KlResult {
  double value = 0.0;
  Gradients weight_grads;
  std::vector<double> logit_grads;
};

// Gal-style dropout KL against a zero-mean Gaussian weight prior:
// (1/beta) * sum_u [ (1-p_u) * ||w_u||^2 / (2 sigma_p^2) - H_b(p_u) ]
// where w_u is unit u's incoming weight row. Gradients carry the 1/beta.
KlResult kl_regularizer(const DropoutPosterior& post, double beta);

}  // namespace bayesrx::nn
