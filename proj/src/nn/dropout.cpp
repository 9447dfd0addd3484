#include "nn/dropout.hpp"

#include <cmath>
#include <limits>

#include "common/errors.hpp"

namespace bayesrx::nn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
}

double clamp_open_unit(double u) {
  const double eps = 1e-12;
  if (u < eps) return eps;
  if (u > 1.0 - eps) return 1.0 - eps;
  return u;
}

}  // namespace

DropoutPosterior make_posterior(NetworkParams nominal, double init_drop_prob) {
  if (init_drop_prob <= 0.0 || init_drop_prob >= 1.0) {
    throw InvalidInput("initial drop probability must lie in (0,1)");
  }
  DropoutPosterior post;
  post.nominal = std::move(nominal);
  const double logit = std::log(init_drop_prob / (1.0 - init_drop_prob));
  post.dropout_logits.assign(post.nominal.hidden_units(), logit);
  return post;
}

DropoutPosterior point_mass_posterior(NetworkParams nominal) {
  DropoutPosterior post;
  post.nominal = std::move(nominal);
  post.dropout_logits.assign(post.nominal.hidden_units(),
                             -std::numeric_limits<double>::infinity());
  return post;
}

double concrete_mask(double logit, double uniform_draw, double temperature) {
  if (!(uniform_draw > 0.0) || !(uniform_draw < 1.0)) {
    throw InvalidInput("uniform draw outside (0,1)");
  }
  if (!(temperature > 0.0)) throw InvalidInput("temperature must be positive");
  const double g = std::log(uniform_draw) - std::log(1.0 - uniform_draw);
  return sigmoid((logit + g) / temperature);
}

void sample_soft_masks(const DropoutPosterior& post, std::mt19937_64& rng,
                       std::span<double> mask_out, std::span<double> z_out) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t i = 0; i < post.dropout_logits.size(); ++i) {
    const double u = clamp_open_unit(uni(rng));
    const double z = concrete_mask(post.dropout_logits[i], u, post.temperature);
    z_out[i] = z;
    mask_out[i] = 1.0 - z;
  }
}

void sample_hard_masks(const DropoutPosterior& post, std::mt19937_64& rng,
                       std::span<double> mask_out) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t i = 0; i < post.dropout_logits.size(); ++i) {
    const double p = sigmoid(post.dropout_logits[i]);
    mask_out[i] = uni(rng) < p ? 0.0 : 1.0;
  }
}

NetworkParams sample_dropout_realization(const DropoutPosterior& post, std::mt19937_64& rng) {
  std::vector<double> mask(post.dropout_logits.size());
  sample_hard_masks(post, rng, mask);
  NetworkParams net = post.nominal;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) {
    const std::size_t units = net.layer_sizes[l + 1];
    const std::size_t next_out = net.layer_sizes[l + 2];
    auto& wnext = net.weights[l + 1];
    for (std::size_t i = 0; i < units; ++i) {
      if (mask[off + i] == 0.0) {
        for (std::size_t r = 0; r < next_out; ++r) wnext[r * units + i] = 0.0;
      }
    }
    off += units;
  }
  return net;
}

KlResult kl_regularizer(const DropoutPosterior& post, double beta) {
  if (!(beta > 0.0)) throw InvalidInput("beta must be positive");
  const double inv_beta = 1.0 / beta;
  const double var2 = 2.0 * post.prior_stddev * post.prior_stddev;

  KlResult res;
  res.weight_grads = zero_gradients_like(post.nominal);
  res.logit_grads.assign(post.dropout_logits.size(), 0.0);

  const auto& net = post.nominal;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) {
    const std::size_t units = net.layer_sizes[l + 1];
    const std::size_t in_n = net.layer_sizes[l];
    for (std::size_t i = 0; i < units; ++i) {
      const double alpha = post.dropout_logits[off + i];
      const double p = sigmoid(alpha);
      const double* row = net.weights[l].data() + i * in_n;
      double norm2 = 0.0;
      for (std::size_t c = 0; c < in_n; ++c) norm2 += row[c] * row[c];
      res.value += inv_beta * ((1.0 - p) * norm2 / var2 - binary_entropy(p));
      double* grow = res.weight_grads.weights[l].data() + i * in_n;
      const double wg = inv_beta * (1.0 - p) / (post.prior_stddev * post.prior_stddev);
      for (std::size_t c = 0; c < in_n; ++c) grow[c] = wg * row[c];
      const double pq = p * (1.0 - p);
      res.logit_grads[off + i] = pq == 0.0 ? 0.0 : inv_beta * pq * (alpha - norm2 / var2);
    }
    off += units;
  }
  return res;
}

}  // namespace bayesrx::nn
