#include "deepsic/deepsic_train.hpp"

#include <cmath>
#include <random>
#include <string>

#include "common/errors.hpp"
#include "common/seeds.hpp"
#include "nn/adam.hpp"

namespace bayesrx::deepsic {

namespace {

void check_pilots(const modem::TransmissionBlock& block) {
  if (block.pilot_count == 0) throw ConfigError("pilot_count must be positive for training");
}

std::vector<std::vector<double>> build_features(const modem::TransmissionBlock& block,
                                                const modem::SoftSymbols& priors,
                                                std::size_t user) {
  const std::size_t b = block.pilot_count;
  std::vector<std::vector<double>> feats(b);
  const std::size_t f = 2 * block.antennas + (block.users - 1) * priors.points;
  for (std::size_t s = 0; s < b; ++s) {
    feats[s].resize(f);
    detail::assemble_features(block.outputs_at(s), priors, s, user, feats[s]);
  }
  return feats;
}

std::vector<std::vector<int>> user_labels(const modem::TransmissionBlock& block,
                                          std::size_t user) {
  std::vector<std::vector<int>> labels(block.pilot_count);
  for (std::size_t s = 0; s < block.pilot_count; ++s) {
    labels[s] = {static_cast<int>(block.symbols[s * block.users + user])};
  }
  return labels;
}

void module_divergence(double loss, std::size_t k, std::size_t q) {
  if (!std::isfinite(loss)) {
    throw TrainingError("detector module (k=" + std::to_string(k) + ",q=" + std::to_string(q) +
                        ") diverged (non-finite loss)");
  }
}

// Uniform draws feeding the relaxed masks, clamped like sample_soft_masks.
std::vector<double> mask_uniforms(std::size_t units, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> u(units);
  for (auto& x : u) {
    x = uni(rng);
    if (x < 1e-12) x = 1e-12;
    if (x > 1.0 - 1e-12) x = 1.0 - 1e-12;
  }
  return u;
}

struct MaskPair {
  std::vector<double> mask;
  std::vector<double> z;
};

MaskPair masks_from_uniforms(const nn::DropoutPosterior& post, std::span<const double> u) {
  MaskPair mp;
  mp.mask.resize(u.size());
  mp.z.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    mp.z[i] = nn::concrete_mask(post.dropout_logits[i], u[i], post.temperature);
    mp.mask[i] = 1.0 - mp.z[i];
  }
  return mp;
}

// mask = 1 - z, z = sigmoid((logit + log u - log(1-u)) / T).
void chain_mask_to_logits(std::span<const double> mask_grads, std::span<const double> z,
                          double temperature, std::span<double> dlogits) {
  for (std::size_t i = 0; i < mask_grads.size(); ++i) {
    dlogits[i] += -mask_grads[i] * z[i] * (1.0 - z[i]) / temperature;
  }
}

void add_gradients(nn::Gradients& acc, const nn::Gradients& extra) {
  for (std::size_t l = 0; l < acc.weights.size(); ++l) {
    for (std::size_t i = 0; i < acc.weights[l].size(); ++i) acc.weights[l][i] += extra.weights[l][i];
    for (std::size_t i = 0; i < acc.biases[l].size(); ++i) acc.biases[l][i] += extra.biases[l][i];
  }
}

// Routes a sample's raw feature gradient into the previous level's
// per-user output gradients.
void route_input_grads(std::span<const double> input_grad, std::size_t antennas,
                       std::size_t points, std::size_t skip_user,
                       std::vector<std::vector<std::vector<double>>>& d_prev, std::size_t sample) {
  std::size_t off = 2 * antennas;
  for (std::size_t l = 0; l < d_prev.size(); ++l) {
    if (l == skip_user) continue;
    auto& dst = d_prev[l][sample];
    for (std::size_t p = 0; p < points; ++p) dst[p] += input_grad[off + p];
    off += points;
  }
}

DeepSicPosterior init_posterior(const modem::TransmissionBlock& block, std::size_t iterations,
                                const DeepSicTrainOptions& opts, DeepSicPosterior::Mode mode) {
  auto nets = make_deepsic(block.users, block.antennas, iterations,
                           block.constellation->size(), opts.seed);
  DeepSicPosterior post;
  post.mode = mode;
  post.users = nets.users;
  post.antennas = nets.antennas;
  post.iterations = nets.iterations;
  post.points = nets.points;
  post.ensemble = opts.ensemble;
  post.modules.reserve(nets.modules.size());
  for (auto& net : nets.modules) {
    auto p = nn::make_posterior(std::move(net), opts.init_drop_prob);
    p.temperature = opts.temperature;
    p.prior_stddev = opts.prior_stddev;
    post.modules.push_back(std::move(p));
  }
  return post;
}

}  // namespace

DeepSicParams train_deepsic_frequentist(const modem::TransmissionBlock& block,
                                        std::size_t iterations, const DeepSicTrainOptions& opts) {
  check_pilots(block);
  const std::size_t users = block.users;
  const std::size_t points = block.constellation->size();
  auto params = make_deepsic(users, block.antennas, iterations, points, opts.seed);
  if (opts.module_traces) opts.module_traces->assign(users * iterations, {});

  auto priors = modem::SoftSymbols::uniform(users, block.pilot_count, points);
  for (std::size_t q = 0; q < iterations; ++q) {
    for (std::size_t k = 0; k < users; ++k) {
      auto& net = params.module(k, q);
      const auto feats = build_features(block, priors, k);
      const auto labels = user_labels(block, k);
      auto adam = nn::AdamState::init(opts.lr, nn::adam_chunks(net));
      for (std::size_t step = 0; step < opts.adam_steps; ++step) {
        const auto res = nn::mlp_backward_ce(net, feats, labels);
        module_divergence(res.mean_loss, k, q);
        if (opts.module_traces) (*opts.module_traces)[k * iterations + q].push_back(res.mean_loss);
        nn::adam_step(adam, net, res.grads);
      }
    }
    // Jacobi refresh of the training inputs for the next iteration.
    auto next = priors;
    std::vector<double> feat(params.feature_size());
    for (std::size_t k = 0; k < users; ++k) {
      const auto& net = params.module(k, q);
      for (std::size_t s = 0; s < block.pilot_count; ++s) {
        detail::assemble_features(block.outputs_at(s), priors, s, k, feat);
        nn::mlp_forward(net, feat, {}, {next.at(s, k), points});
      }
    }
    priors = std::move(next);
  }
  return params;
}

DeepSicLossGrads deepsic_e2e_loss_grads(const DeepSicPosterior& post,
                                        const std::vector<std::vector<double>>& uniforms,
                                        std::span<const Cx> outputs, std::size_t times,
                                        std::span<const std::size_t> labels, double beta) {
  const std::size_t users = post.users;
  const std::size_t iters = post.iterations;
  const std::size_t points = post.points;
  if (times == 0) throw InvalidInput("empty training batch");

  std::vector<MaskPair> masks(users * iters);
  for (std::size_t m = 0; m < masks.size(); ++m) {
    masks[m] = masks_from_uniforms(post.modules[m], uniforms[m]);
  }

  // Forward, keeping every level of soft estimates.
  std::vector<modem::SoftSymbols> levels;
  levels.push_back(modem::SoftSymbols::uniform(users, times, points));
  std::vector<double> feat(2 * post.antennas + (users - 1) * points);
  for (std::size_t q = 0; q < iters; ++q) {
    auto next = levels[q];
    for (std::size_t k = 0; k < users; ++k) {
      const std::size_t m = k * iters + q;
      for (std::size_t s = 0; s < times; ++s) {
        detail::assemble_features(outputs.subspan(s * post.antennas, post.antennas), levels[q], s,
                                  k, feat);
        nn::mlp_forward(post.modules[m].nominal, feat, masks[m].mask, {next.at(s, k), points});
      }
    }
    levels.push_back(std::move(next));
  }

  DeepSicLossGrads out;
  out.grads.resize(users * iters);
  out.dlogits.resize(users * iters);

  // d loss / d soft-output, raw per sample, for the level being consumed.
  std::vector<std::vector<std::vector<double>>> d_cur(
      users, std::vector<std::vector<double>>(times, std::vector<double>(points, 0.0)));
  auto d_prev = d_cur;

  auto rebuild_feats = [&](std::size_t q, std::size_t k) {
    std::vector<std::vector<double>> feats(times);
    for (std::size_t s = 0; s < times; ++s) {
      feats[s].resize(feat.size());
      detail::assemble_features(outputs.subspan(s * post.antennas, post.antennas), levels[q], s, k,
                                feats[s]);
    }
    return feats;
  };

  for (std::size_t q = iters; q-- > 0;) {
    const bool last = q + 1 == iters;
    const bool first = q == 0;
    for (auto& per_user : d_prev) {
      for (auto& row : per_user) row.assign(points, 0.0);
    }
    for (std::size_t k = 0; k < users; ++k) {
      const std::size_t m = k * iters + q;
      const auto& mod = post.modules[m];
      const auto feats = rebuild_feats(q, k);
      nn::BackwardOptions bo;
      bo.mask = masks[m].mask;
      bo.want_mask_grads = true;
      bo.want_input_grads = !first;
      nn::BackwardResult res;
      if (last) {
        std::vector<std::vector<int>> lab(times);
        for (std::size_t s = 0; s < times; ++s) {
          lab[s] = {static_cast<int>(labels[s * users + k])};
        }
        res = nn::mlp_backward_ce(mod.nominal, feats, lab, bo);
        out.loss += res.mean_loss;
      } else {
        res = nn::mlp_backward_vjp(mod.nominal, feats, d_cur[k], bo);
      }
      out.grads[m] = std::move(res.grads);
      out.dlogits[m].assign(mod.dropout_logits.size(), 0.0);
      chain_mask_to_logits(res.mask_grads, masks[m].z, mod.temperature, out.dlogits[m]);
      if (!first) {
        for (std::size_t s = 0; s < times; ++s) {
          route_input_grads(res.input_grads[s], post.antennas, points, k, d_prev, s);
        }
      }
    }
    std::swap(d_cur, d_prev);
  }

  for (std::size_t m = 0; m < post.modules.size(); ++m) {
    const auto kl = nn::kl_regularizer(post.modules[m], beta);
    out.kl += kl.value;
    add_gradients(out.grads[m], kl.weight_grads);
    for (std::size_t i = 0; i < kl.logit_grads.size(); ++i) {
      out.dlogits[m][i] += kl.logit_grads[i];
    }
  }
  return out;
}

DeepSicPosterior train_deepsic_bayesian_e2e(const modem::TransmissionBlock& block,
                                            std::size_t iterations,
                                            const DeepSicTrainOptions& opts) {
  check_pilots(block);
  auto post = init_posterior(block, iterations, opts, DeepSicPosterior::Mode::end_to_end);
  const std::size_t users = post.users;

  std::vector<std::size_t> sizes;
  for (const auto& mod : post.modules) {
    for (const auto& s : nn::adam_chunks(mod.nominal)) sizes.push_back(s);
    sizes.push_back(mod.dropout_logits.size());
  }
  auto adam = nn::AdamState::init(opts.lr, sizes);

  const std::span<const Cx> pilots{block.outputs.data(), block.pilot_count * block.antennas};
  const std::span<const std::size_t> labels{block.symbols.data(), block.pilot_count * users};
  std::vector<std::vector<double>> uniforms(post.modules.size());
  for (std::size_t step = 0; step < opts.adam_steps; ++step) {
    for (std::size_t k = 0; k < users; ++k) {
      for (std::size_t q = 0; q < iterations; ++q) {
        std::mt19937_64 rng(derive_seed(opts.seed, "mask", {k, q, step}));
        uniforms[k * iterations + q] =
            mask_uniforms(post.module(k, q).dropout_logits.size(), rng);
      }
    }
    auto lg = deepsic_e2e_loss_grads(post, uniforms, pilots, block.pilot_count, labels, opts.beta);
    if (!std::isfinite(lg.loss + lg.kl)) {
      throw TrainingError("detector training diverged (non-finite free energy)");
    }
    if (opts.loss_trace) opts.loss_trace->push_back(lg.loss + lg.kl);

    std::vector<double*> chunks;
    std::vector<const double*> grads;
    for (std::size_t m = 0; m < post.modules.size(); ++m) {
      auto& net = post.modules[m].nominal;
      for (std::size_t l = 0; l < net.layer_count(); ++l) {
        chunks.push_back(net.weights[l].data());
        grads.push_back(lg.grads[m].weights[l].data());
        chunks.push_back(net.biases[l].data());
        grads.push_back(lg.grads[m].biases[l].data());
      }
      chunks.push_back(post.modules[m].dropout_logits.data());
      grads.push_back(lg.dlogits[m].data());
    }
    nn::adam_step(adam, chunks, grads);
  }
  return post;
}

DeepSicPosterior train_deepsic_modular_bayesian(const modem::TransmissionBlock& block,
                                                std::size_t iterations,
                                                const DeepSicTrainOptions& opts) {
  check_pilots(block);
  auto post = init_posterior(block, iterations, opts, DeepSicPosterior::Mode::modular);
  const std::size_t users = post.users;
  const std::size_t points = post.points;
  if (opts.module_traces) opts.module_traces->assign(users * iterations, {});

  auto priors = modem::SoftSymbols::uniform(users, block.pilot_count, points);
  for (std::size_t q = 0; q < iterations; ++q) {
    for (std::size_t k = 0; k < users; ++k) {
      auto& mod = post.module(k, q);
      const auto feats = build_features(block, priors, k);
      const auto labels = user_labels(block, k);

      std::vector<std::size_t> sizes = nn::adam_chunks(mod.nominal);
      sizes.push_back(mod.dropout_logits.size());
      auto adam = nn::AdamState::init(opts.lr, sizes);

      for (std::size_t step = 0; step < opts.adam_steps; ++step) {
        std::mt19937_64 rng(derive_seed(opts.seed, "mask", {k, q, step}));
        const auto u = mask_uniforms(mod.dropout_logits.size(), rng);
        const auto mp = masks_from_uniforms(mod, u);

        nn::BackwardOptions bo;
        bo.mask = mp.mask;
        bo.want_mask_grads = true;
        auto res = nn::mlp_backward_ce(mod.nominal, feats, labels, bo);
        std::vector<double> dlogits(mod.dropout_logits.size(), 0.0);
        chain_mask_to_logits(res.mask_grads, mp.z, mod.temperature, dlogits);
        const auto kl = nn::kl_regularizer(mod, opts.beta);
        add_gradients(res.grads, kl.weight_grads);
        for (std::size_t i = 0; i < dlogits.size(); ++i) dlogits[i] += kl.logit_grads[i];

        module_divergence(res.mean_loss + kl.value, k, q);
        if (opts.module_traces) {
          (*opts.module_traces)[k * iterations + q].push_back(res.mean_loss + kl.value);
        }

        std::vector<double*> chunks;
        std::vector<const double*> grads;
        auto& net = mod.nominal;
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
          chunks.push_back(net.weights[l].data());
          grads.push_back(res.grads.weights[l].data());
          chunks.push_back(net.biases[l].data());
          grads.push_back(res.grads.biases[l].data());
        }
        chunks.push_back(mod.dropout_logits.data());
        grads.push_back(dlogits.data());
        nn::adam_step(adam, chunks, grads);
      }
    }

    // Ensembled (J-averaged) outputs of the trained iteration feed the next.
    auto next = priors;
    std::vector<double> feat(2 * post.antennas + (users - 1) * points);
    std::vector<double> probs(points);
    for (std::size_t k = 0; k < users; ++k) {
      for (std::size_t s = 0; s < block.pilot_count; ++s) {
        double* dst = next.at(s, k);
        for (std::size_t p = 0; p < points; ++p) dst[p] = 0.0;
      }
      for (std::size_t j = 0; j < opts.ensemble; ++j) {
        std::mt19937_64 rng(derive_seed(opts.seed, "train_ens", {k, q, j}));
        const auto realized = nn::sample_dropout_realization(post.module(k, q), rng);
        for (std::size_t s = 0; s < block.pilot_count; ++s) {
          detail::assemble_features(block.outputs_at(s), priors, s, k, feat);
          nn::mlp_forward(realized, feat, {}, probs);
          double* dst = next.at(s, k);
          for (std::size_t p = 0; p < points; ++p) dst[p] += probs[p];
        }
      }
      for (std::size_t s = 0; s < block.pilot_count; ++s) {
        double* dst = next.at(s, k);
        for (std::size_t p = 0; p < points; ++p) dst[p] /= static_cast<double>(opts.ensemble);
      }
    }
    priors = std::move(next);
  }
  return post;
}

nn::NetworkParams train_blackbox(const modem::TransmissionBlock& block,
                                 const DeepSicTrainOptions& opts) {
  check_pilots(block);
  const std::size_t users = block.users;
  const std::size_t points = block.constellation->size();
  const std::size_t sizes[5] = {2 * block.antennas, 32, 32, 32, users * points};
  std::mt19937_64 rng(derive_seed(opts.seed, "blackbox_init"));
  auto net = nn::make_network(sizes, users, rng);

  std::vector<std::vector<double>> feats(block.pilot_count);
  std::vector<std::vector<int>> labels(block.pilot_count);
  for (std::size_t s = 0; s < block.pilot_count; ++s) {
    feats[s].resize(2 * block.antennas);
    const auto y = block.outputs_at(s);
    for (std::size_t n = 0; n < block.antennas; ++n) {
      feats[s][n] = y[n].real();
      feats[s][block.antennas + n] = y[n].imag();
    }
    labels[s].resize(users);
    for (std::size_t k = 0; k < users; ++k) {
      labels[s][k] = static_cast<int>(block.symbols[s * users + k]);
    }
  }

  auto adam = nn::AdamState::init(opts.lr, nn::adam_chunks(net));
  for (std::size_t step = 0; step < opts.adam_steps; ++step) {
    const auto res = nn::mlp_backward_ce(net, feats, labels);
    if (!std::isfinite(res.mean_loss)) {
      throw TrainingError("black-box detector training diverged (non-finite loss)");
    }
    if (opts.loss_trace) opts.loss_trace->push_back(res.mean_loss);
    nn::adam_step(adam, net, res.grads);
  }
  return net;
}

modem::SoftSymbols blackbox_detect(const nn::NetworkParams& net, std::span<const Cx> outputs,
                                   std::size_t times, std::size_t users) {
  const std::size_t antennas = net.input_size() / 2;
  const std::size_t points = net.head_size();
  if (net.head_count != users) throw InvalidInput("user count does not match the network heads");
  if (outputs.size() != times * antennas) throw InvalidInput("channel output size mismatch");
  modem::SoftSymbols soft{users, times, points, {}};
  soft.data.assign(users * times * points, 0.0);
  std::vector<double> feat(2 * antennas);
  std::vector<double> probs(users * points);
  for (std::size_t i = 0; i < times; ++i) {
    for (std::size_t n = 0; n < antennas; ++n) {
      feat[n] = outputs[i * antennas + n].real();
      feat[antennas + n] = outputs[i * antennas + n].imag();
    }
    nn::mlp_forward(net, feat, {}, probs);
    for (std::size_t k = 0; k < users; ++k) {
      double* dst = soft.at(i, k);
      for (std::size_t p = 0; p < points; ++p) dst[p] = probs[k * points + p];
    }
  }
  return soft;
}

}  // namespace bayesrx::deepsic
