#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modem/block.hpp"
#include "nn/dropout.hpp"
#include "nn/mlp.hpp"

namespace bayesrx::deepsic {

using modem::Cx;

inline constexpr std::size_t kHiddenUnits = 16;

// K x Q grid of soft interference-cancellation classifiers. Module (k,q)
// maps [Re y; Im y; previous-iteration estimates of the other users] to a
// probability vector over the constellation.
struct DeepSicParams {
  std::size_t users = 0;
  std::size_t antennas = 0;
  std::size_t iterations = 0;
  std::size_t points = 0;
  std::vector<nn::NetworkParams> modules;  // (user, iteration) row-major

  std::size_t feature_size() const { return 2 * antennas + (users - 1) * points; }
  nn::NetworkParams& module(std::size_t k, std::size_t q) { return modules[k * iterations + q]; }
  const nn::NetworkParams& module(std::size_t k, std::size_t q) const {
    return modules[k * iterations + q];
  }
};

struct DeepSicPosterior {
  enum class Mode { end_to_end, modular };
  Mode mode = Mode::end_to_end;
  std::size_t users = 0;
  std::size_t antennas = 0;
  std::size_t iterations = 0;
  std::size_t points = 0;
  std::size_t ensemble = 1;
  std::vector<nn::DropoutPosterior> modules;  // (user, iteration) row-major

  nn::DropoutPosterior& module(std::size_t k, std::size_t q) {
    return modules[k * iterations + q];
  }
  const nn::DropoutPosterior& module(std::size_t k, std::size_t q) const {
    return modules[k * iterations + q];
  }
};

// Fresh grid; module (k,q) weights come from derive_seed(seed,"init",{k,q}).
DeepSicParams make_deepsic(std::size_t users, std::size_t antennas, std::size_t iterations,
                           std::size_t points, std::uint64_t seed);

// Iterative inference from uniform initial estimates: every iteration-q
// module reads the full set of iteration q-1 outputs (Jacobi schedule).
// `outputs` is (time, antenna) row-major, `times` rows.
modem::SoftSymbols deepsic_infer(const DeepSicParams& params, std::span<const Cx> outputs,
                                 std::size_t times);

// Ensemble of J full-grid dropout realizations; member j realizes module
// (k,q) from derive_seed(seed,"member",{k,q,j}) and the final per-user
// vectors are averaged over members.
modem::SoftSymbols bayesian_infer(const DeepSicPosterior& post, std::span<const Cx> outputs,
                                  std::size_t times, std::size_t ensemble, std::uint64_t seed);

// Per-module ensembling: at each (k,q) the J realized module outputs are
// averaged before the next iteration consumes them. Same member seeds as
// bayesian_infer, so the two coincide at Q=1.
modem::SoftSymbols modular_bayesian_infer(const DeepSicPosterior& post,
                                          std::span<const Cx> outputs, std::size_t times,
                                          std::size_t ensemble, std::uint64_t seed);

// Argmax per (time, user); ties break toward the lowest point index.
std::vector<std::size_t> hard_decisions(const modem::SoftSymbols& soft);

// Snapshot directory: one nn binary per module (deepsic_k{k}_q{q}.bin, plus
// a _logits.bin sidecar for posteriors) and a key=value manifest.
void save_deepsic(const DeepSicParams& params, const std::string& dir);
DeepSicParams load_deepsic(const std::string& dir);
void save_deepsic_posterior(const DeepSicPosterior& post, const std::string& dir);
DeepSicPosterior load_deepsic_posterior(const std::string& dir);

namespace detail {
void assemble_features(std::span<const Cx> y, const modem::SoftSymbols& priors, std::size_t time,
                       std::size_t user, std::span<double> out);
}

}  // namespace bayesrx::deepsic
