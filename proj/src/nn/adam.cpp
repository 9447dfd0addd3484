#include "nn/adam.hpp"

#include <cmath>

#include "common/errors.hpp"

namespace bayesrx::nn {

AdamState AdamState::init(double lr, std::span<const std::size_t> chunk_sizes) {
  AdamState st;
  st.lr = lr;
  for (std::size_t n : chunk_sizes) {
    st.m.emplace_back(n, 0.0);
    st.v.emplace_back(n, 0.0);
  }
  return st;
}

void adam_step(AdamState& st, std::span<double* const> chunks,
               std::span<const double* const> grads) {
  if (chunks.size() != st.m.size() || grads.size() != st.m.size()) {
    throw InvalidInput("adam chunk layout mismatch");
  }
  st.step += 1;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    double* p = chunks[k];
    const double* g = grads[k];
    auto& m = st.m[k];
    auto& v = st.v[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

std::vector<std::size_t> adam_chunks(const NetworkParams& net) {
  std::vector<std::size_t> sizes;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    sizes.push_back(net.weights[l].size());
    sizes.push_back(net.biases[l].size());
  }
  return sizes;
}

void adam_step(AdamState& st, NetworkParams& net, const Gradients& grads) {
  std::vector<double*> chunks;
  std::vector<const double*> g;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    chunks.push_back(net.weights[l].data());
    chunks.push_back(net.biases[l].data());
    g.push_back(grads.weights[l].data());
    g.push_back(grads.biases[l].data());
  }
  adam_step(st, chunks, g);
}

}  // namespace bayesrx::nn
