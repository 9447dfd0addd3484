#include "nn/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "common/errors.hpp"

namespace bayesrx::nn {

namespace {

void check_finite(std::span<const double> v, std::size_t layer) {
  double s = 0.0;
  for (double x : v) s += x;
  if (!std::isfinite(s)) {
    throw TrainingError("non-finite activation in layer " + std::to_string(layer));
  }
}

void affine(const std::vector<double>& w, const std::vector<double>& b, std::size_t out_n,
            std::size_t in_n, std::span<const double> x, std::span<double> z) {
  for (std::size_t r = 0; r < out_n; ++r) {
    const double* row = w.data() + r * in_n;
    double acc = b[r];
    for (std::size_t c = 0; c < in_n; ++c) acc += row[c] * x[c];
    z[r] = acc;
  }
}

void softmax_heads(std::span<const double> z, std::size_t heads, std::span<double> p) {
  const std::size_t hs = z.size() / heads;
  for (std::size_t h = 0; h < heads; ++h) {
    const double* zh = z.data() + h * hs;
    double* ph = p.data() + h * hs;
    double zmax = zh[0];
    for (std::size_t i = 1; i < hs; ++i) zmax = std::max(zmax, zh[i]);
    double denom = 0.0;
    for (std::size_t i = 0; i < hs; ++i) {
      ph[i] = std::exp(zh[i] - zmax);
      denom += ph[i];
    }
    for (std::size_t i = 0; i < hs; ++i) ph[i] /= denom;
  }
}

struct Trace {
  // z[l] are pre-activations of weight layer l; acts[l] are layer inputs
  // (acts[0] = features, acts[l>=1] = masked relu outputs).
  std::vector<std::vector<double>> z;
  std::vector<std::vector<double>> acts;
  std::vector<double> probs;
};

void forward_trace(const NetworkParams& net, std::span<const double> features,
                   std::span<const double> mask, Trace& t) {
  if (features.size() != net.input_size()) {
    throw InvalidInput("feature length " + std::to_string(features.size()) +
                       " does not match input size " + std::to_string(net.input_size()));
  }
  if (!mask.empty() && mask.size() != net.hidden_units()) {
    throw InvalidInput("mask length " + std::to_string(mask.size()) +
                       " does not match hidden unit count " +
                       std::to_string(net.hidden_units()));
  }
  const std::size_t layers = net.layer_count();
  t.z.resize(layers);
  t.acts.resize(layers);
  t.acts[0].assign(features.begin(), features.end());
  std::size_t mask_off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in_n = net.layer_sizes[l];
    const std::size_t out_n = net.layer_sizes[l + 1];
    t.z[l].resize(out_n);
    affine(net.weights[l], net.biases[l], out_n, in_n, t.acts[l], t.z[l]);
    check_finite(t.z[l], l);
    if (l + 1 < layers) {
      auto& a = t.acts[l + 1];
      a.resize(out_n);
      for (std::size_t i = 0; i < out_n; ++i) {
        double v = t.z[l][i] > 0.0 ? t.z[l][i] : 0.0;
        if (!mask.empty()) v *= mask[mask_off + i];
        a[i] = v;
      }
      mask_off += out_n;
    } else {
      t.probs.resize(out_n);
      softmax_heads(t.z[l], net.head_count, t.probs);
    }
  }
}

}  // namespace

std::size_t NetworkParams::hidden_units() const {
  std::size_t n = 0;
  for (std::size_t l = 1; l + 1 < layer_sizes.size(); ++l) n += layer_sizes[l];
  return n;
}

NetworkParams make_network(std::span<const std::size_t> layer_sizes, std::size_t head_count,
                           std::mt19937_64& rng) {
  if (layer_sizes.size() < 2) throw InvalidInput("network needs at least input and output sizes");
  if (head_count == 0 || layer_sizes.back() % head_count != 0) {
    throw InvalidInput("output size not divisible by head count");
  }
  NetworkParams net;
  net.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  net.head_count = head_count;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in_n = layer_sizes[l];
    const std::size_t out_n = layer_sizes[l + 1];
    const double r = std::sqrt(6.0 / static_cast<double>(in_n + out_n));
    std::uniform_real_distribution<double> u(-r, r);
    std::vector<double> w(out_n * in_n);
    for (auto& x : w) x = u(rng);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(out_n, 0.0);
  }
  return net;
}

void mlp_forward(const NetworkParams& net, std::span<const double> features,
                 std::span<const double> mask, std::span<double> probs_out) {
  thread_local Trace t;
  forward_trace(net, features, mask, t);
  std::copy(t.probs.begin(), t.probs.end(), probs_out.begin());
}

std::vector<double> mlp_forward(const NetworkParams& net, std::span<const double> features,
                                std::span<const double> mask) {
  std::vector<double> p(net.output_size());
  mlp_forward(net, features, mask, p);
  return p;
}

double cross_entropy_loss(std::span<const double> probs, std::size_t label, bool* clipped) {
  double p = probs[label];
  const bool floored = p < kProbFloor;
  if (floored) p = kProbFloor;
  if (clipped) *clipped = floored;
  return -std::log(p);
}

Gradients zero_gradients_like(const NetworkParams& net) {
  Gradients g;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    g.weights.emplace_back(net.weights[l].size(), 0.0);
    g.biases.emplace_back(net.biases[l].size(), 0.0);
  }
  return g;
}

namespace {

// Shared backward pass. Exactly one of `labels` / `prob_grads` is non-null.
BackwardResult backward_impl(const NetworkParams& net,
                             std::span<const std::vector<double>> features,
                             std::span<const std::vector<int>> labels,
                             std::span<const std::vector<double>> prob_grads,
                             const BackwardOptions& opts) {
  const std::size_t n = features.size();
  if (n == 0) throw InvalidInput("empty batch");
  const std::size_t layers = net.layer_count();
  const std::size_t hs = net.head_size();

  BackwardResult out;
  out.grads = zero_gradients_like(net);
  if (opts.want_mask_grads) out.mask_grads.assign(net.hidden_units(), 0.0);
  if (opts.want_input_grads) out.input_grads.resize(n);

  Trace t;
  std::vector<double> dz, da;
  for (std::size_t s = 0; s < n; ++s) {
    forward_trace(net, features[s], opts.mask, t);

    dz.assign(net.output_size(), 0.0);
    if (!labels.empty()) {
      for (std::size_t h = 0; h < net.head_count; ++h) {
        const std::size_t label = static_cast<std::size_t>(labels[s][h]);
        out.mean_loss += cross_entropy_loss(
            std::span<const double>(t.probs.data() + h * hs, hs), label);
        for (std::size_t i = 0; i < hs; ++i) {
          dz[h * hs + i] = t.probs[h * hs + i] - (i == label ? 1.0 : 0.0);
        }
      }
    } else {
      const auto& g = prob_grads[s];
      for (std::size_t h = 0; h < net.head_count; ++h) {
        double dot = 0.0;
        for (std::size_t i = 0; i < hs; ++i) dot += g[h * hs + i] * t.probs[h * hs + i];
        for (std::size_t i = 0; i < hs; ++i) {
          dz[h * hs + i] = t.probs[h * hs + i] * (g[h * hs + i] - dot);
        }
      }
    }

    std::size_t mask_off = net.hidden_units();
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in_n = net.layer_sizes[l];
      const std::size_t out_n = net.layer_sizes[l + 1];
      auto& gw = out.grads.weights[l];
      auto& gb = out.grads.biases[l];
      const auto& a = t.acts[l];
      for (std::size_t r = 0; r < out_n; ++r) {
        const double d = dz[r];
        if (d != 0.0) {
          double* grow = gw.data() + r * in_n;
          for (std::size_t c = 0; c < in_n; ++c) grow[c] += d * a[c];
        }
        gb[r] += d;
      }
      if (l == 0) {
        if (opts.want_input_grads) {
          auto& ig = out.input_grads[s];
          ig.assign(in_n, 0.0);
          for (std::size_t r = 0; r < out_n; ++r) {
            const double d = dz[r];
            if (d == 0.0) continue;
            const double* row = net.weights[l].data() + r * in_n;
            for (std::size_t c = 0; c < in_n; ++c) ig[c] += d * row[c];
          }
        }
        break;
      }
      da.assign(in_n, 0.0);
      for (std::size_t r = 0; r < out_n; ++r) {
        const double d = dz[r];
        if (d == 0.0) continue;
        const double* row = net.weights[l].data() + r * in_n;
        for (std::size_t c = 0; c < in_n; ++c) da[c] += d * row[c];
      }
      mask_off -= in_n;
      const auto& zprev = t.z[l - 1];
      dz.assign(in_n, 0.0);
      for (std::size_t c = 0; c < in_n; ++c) {
        const double relu_z = zprev[c] > 0.0 ? zprev[c] : 0.0;
        if (opts.want_mask_grads) out.mask_grads[mask_off + c] += da[c] * relu_z;
        double m = opts.mask.empty() ? 1.0 : opts.mask[mask_off + c];
        dz[c] = zprev[c] > 0.0 ? da[c] * m : 0.0;
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t l = 0; l < layers; ++l) {
    for (auto& x : out.grads.weights[l]) x *= inv_n;
    for (auto& x : out.grads.biases[l]) x *= inv_n;
  }
  for (auto& x : out.mask_grads) x *= inv_n;
  out.mean_loss *= inv_n;
  return out;
}

}  // namespace

BackwardResult mlp_backward_ce(const NetworkParams& net,
                               std::span<const std::vector<double>> features,
                               std::span<const std::vector<int>> labels,
                               const BackwardOptions& opts) {
  if (labels.size() != features.size()) throw InvalidInput("label/feature count mismatch");
  return backward_impl(net, features, labels, {}, opts);
}

BackwardResult mlp_backward_vjp(const NetworkParams& net,
                                std::span<const std::vector<double>> features,
                                std::span<const std::vector<double>> prob_grads,
                                const BackwardOptions& opts) {
  if (prob_grads.size() != features.size()) throw InvalidInput("grad/feature count mismatch");
  return backward_impl(net, features, {}, prob_grads, opts);
}

static_assert(std::endian::native == std::endian::little, "serialization assumes little-endian");

void save_network(const NetworkParams& net, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  const std::uint32_t count = static_cast<std::uint32_t>(net.layer_sizes.size());
  f.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (std::size_t sz : net.layer_sizes) {
    const std::uint32_t v = static_cast<std::uint32_t>(sz);
    f.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    f.write(reinterpret_cast<const char*>(net.weights[l].data()),
            static_cast<std::streamsize>(net.weights[l].size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(net.biases[l].data()),
            static_cast<std::streamsize>(net.biases[l].size() * sizeof(double)));
  }
  if (!f) throw IoError("write failed: " + path);
}

NetworkParams load_network(const std::string& path, std::size_t head_count) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::uint32_t count = 0;
  f.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!f || count < 2 || count > 64) throw IoError("bad network header: " + path);
  NetworkParams net;
  net.head_count = head_count;
  net.layer_sizes.resize(count);
  for (auto& sz : net.layer_sizes) {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof(v));
    sz = v;
  }
  if (!f) throw IoError("truncated network header: " + path);
  for (std::size_t l = 0; l + 1 < count; ++l) {
    const std::size_t in_n = net.layer_sizes[l];
    const std::size_t out_n = net.layer_sizes[l + 1];
    std::vector<double> w(out_n * in_n);
    std::vector<double> b(out_n);
    f.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
    f.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)));
    if (!f) throw IoError("truncated network payload: " + path);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

}  // namespace bayesrx::nn
