#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace bayesrx::nn {

inline constexpr double kProbFloor = 1e-12;

// Fully connected ReLU classifier. The output layer is one softmax, or
// several independent softmax groups of equal size when head_count > 1
// (used by the joint black-box detector, one head per user).
struct NetworkParams {
  std::vector<std::size_t> layer_sizes;        // input, hidden..., output
  std::vector<std::vector<double>> weights;    // per layer, row-major out x in
  std::vector<std::vector<double>> biases;     // per layer
  std::size_t head_count = 1;

  std::size_t layer_count() const { return weights.size(); }
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t head_size() const { return layer_sizes.back() / head_count; }
  // Total units across hidden layers; dropout masks and logits index these.
  std::size_t hidden_units() const;
};

// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
NetworkParams make_network(std::span<const std::size_t> layer_sizes, std::size_t head_count,
                           std::mt19937_64& rng);

// `mask` is one multiplier per hidden unit (empty = no mask); hidden
// activations are relu(z) * mask. Returns per-head softmax probabilities.
void mlp_forward(const NetworkParams& net, std::span<const double> features,
                 std::span<const double> mask, std::span<double> probs_out);
std::vector<double> mlp_forward(const NetworkParams& net, std::span<const double> features,
                                std::span<const double> mask = {});

// -log(max(probs[label], 1e-12)); *clipped reports whether the floor hit.
double cross_entropy_loss(std::span<const double> probs, std::size_t label,
                          bool* clipped = nullptr);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};
Gradients zero_gradients_like(const NetworkParams& net);

struct BackwardOptions {
  std::span<const double> mask = {};  // shared across the batch
  bool want_mask_grads = false;
  bool want_input_grads = false;
};

struct BackwardResult {
  Gradients grads;                               // batch mean
  std::vector<double> mask_grads;                // batch mean, per hidden unit
  std::vector<std::vector<double>> input_grads;  // per sample
  double mean_loss = 0.0;
};

// Mean cross-entropy over the batch, labels one class index per head.
// Throws TrainingError naming the layer if a non-finite value appears.
BackwardResult mlp_backward_ce(const NetworkParams& net,
                               std::span<const std::vector<double>> features,
                               std::span<const std::vector<int>> labels,
                               const BackwardOptions& opts = {});

// Same backward pass but seeded with dLoss/dprobs per sample instead of
// labels; used when a module's output feeds another module.
BackwardResult mlp_backward_vjp(const NetworkParams& net,
                                std::span<const std::vector<double>> features,
                                std::span<const std::vector<double>> prob_grads,
                                const BackwardOptions& opts = {});

void save_network(const NetworkParams& net, const std::string& path);
NetworkParams load_network(const std::string& path, std::size_t head_count = 1);

}  // namespace bayesrx::nn
