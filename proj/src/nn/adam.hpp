#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nn/mlp.hpp"

namespace bayesrx::nn {

// Adam with bias correction over a jagged list of parameter chunks. The
// chunk layout is fixed at init and must match on every step.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState init(double lr, std::span<const std::size_t> chunk_sizes);
};

void adam_step(AdamState& st, std::span<double* const> chunks,
               std::span<const double* const> grads);

// Convenience for a single network: weights then biases, layer order.
void adam_step(AdamState& st, NetworkParams& net, const Gradients& grads);
std::vector<std::size_t> adam_chunks(const NetworkParams& net);

}  // namespace bayesrx::nn
