#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deepsic/deepsic.hpp"
#include "modem/block.hpp"

namespace bayesrx::deepsic {

struct DeepSicTrainOptions {
  std::size_t adam_steps = 500;
  double lr = 5e-3;
  double beta = 1e4;
  std::size_t ensemble = 5;  // J, used when advancing modular training inputs
  double init_drop_prob = nn::kDefaultDropProb;
  double temperature = nn::kConcreteTemperature;
  double prior_stddev = 1.0;
  std::uint64_t seed = 0;
  // Per-module training curves, (user, iteration) row-major.
  std::vector<std::vector<double>>* module_traces = nullptr;
  // Joint free-energy curve for the end-to-end trainer.
  std::vector<double>* loss_trace = nullptr;
};

// Sequential per-module cross-entropy training on the pilot segment:
// iteration-q modules fit the soft outputs of the trained iteration q-1.
DeepSicParams train_deepsic_frequentist(const modem::TransmissionBlock& block,
                                        std::size_t iterations, const DeepSicTrainOptions& opts);

// One posterior over the whole grid; each step samples one relaxed mask per
// module and descends the end-to-end free energy (final-iteration
// cross-entropy summed over users plus (1/beta) KL).
DeepSicPosterior train_deepsic_bayesian_e2e(const modem::TransmissionBlock& block,
                                            std::size_t iterations,
                                            const DeepSicTrainOptions& opts);

// Per-module posteriors trained sequentially; training inputs for iteration
// q+1 are the J-sample averaged outputs of the trained iteration-q modules.
DeepSicPosterior train_deepsic_modular_bayesian(const modem::TransmissionBlock& block,
                                                std::size_t iterations,
                                                const DeepSicTrainOptions& opts);

// Joint black-box baseline: one network, stacked receive vector in, one
// softmax head per user out. Frequentist training only.
nn::NetworkParams train_blackbox(const modem::TransmissionBlock& block,
                                 const DeepSicTrainOptions& opts);
modem::SoftSymbols blackbox_detect(const nn::NetworkParams& net, std::span<const Cx> outputs,
                                   std::size_t times, std::size_t users);

// Free-energy value and gradients under explicit per-module mask uniforms
// (one entry per hidden unit); exposed for finite-difference checks.
struct DeepSicLossGrads {
  double loss = 0.0;
  double kl = 0.0;
  std::vector<nn::Gradients> grads;          // (user, iteration) row-major
  std::vector<std::vector<double>> dlogits;  // same order
};
DeepSicLossGrads deepsic_e2e_loss_grads(const DeepSicPosterior& post,
                                        const std::vector<std::vector<double>>& uniforms,
                                        std::span<const Cx> outputs, std::size_t times,
                                        std::span<const std::size_t> labels, double beta);

}  // namespace bayesrx::deepsic
