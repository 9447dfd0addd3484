#include "deepsic/deepsic.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include "common/errors.hpp"
#include "common/seeds.hpp"

namespace bayesrx::deepsic {

namespace detail {

void assemble_features(std::span<const Cx> y, const modem::SoftSymbols& priors, std::size_t time,
                       std::size_t user, std::span<double> out) {
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = y[i].real();
    out[n + i] = y[i].imag();
  }
  std::size_t off = 2 * n;
  for (std::size_t l = 0; l < priors.users; ++l) {
    if (l == user) continue;
    const double* p = priors.at(time, l);
    for (std::size_t s = 0; s < priors.points; ++s) out[off + s] = p[s];
    off += priors.points;
  }
}

}  // namespace detail

DeepSicParams make_deepsic(std::size_t users, std::size_t antennas, std::size_t iterations,
                           std::size_t points, std::uint64_t seed) {
  if (users == 0 || antennas == 0 || iterations == 0 || points < 2) {
    throw InvalidInput("bad detector dimensions");
  }
  DeepSicParams p{users, antennas, iterations, points, {}};
  const std::size_t sizes[3] = {p.feature_size(), kHiddenUnits, points};
  p.modules.reserve(users * iterations);
  for (std::size_t k = 0; k < users; ++k) {
    for (std::size_t q = 0; q < iterations; ++q) {
      std::mt19937_64 rng(derive_seed(seed, "init", {k, q}));
      p.modules.push_back(nn::make_network(sizes, 1, rng));
    }
  }
  return p;
}

namespace {

void check_outputs(std::size_t antennas, std::span<const Cx> outputs, std::size_t times) {
  if (times == 0 || outputs.size() != times * antennas) {
    throw InvalidInput("channel output dimensions do not match the detector");
  }
}

// One Jacobi sweep: every (k, q) module consumes `priors`, results land in
// `next`. Modules are indexed by q within grids laid out like DeepSicParams.
void sweep(const std::vector<const nn::NetworkParams*>& nets, std::size_t users,
           std::size_t iterations, std::size_t q, std::span<const Cx> outputs, std::size_t times,
           std::size_t antennas, const modem::SoftSymbols& priors, modem::SoftSymbols& next,
           std::vector<double>& feat) {
  for (std::size_t k = 0; k < users; ++k) {
    const nn::NetworkParams& net = *nets[k * iterations + q];
    for (std::size_t i = 0; i < times; ++i) {
      detail::assemble_features(outputs.subspan(i * antennas, antennas), priors, i, k, feat);
      nn::mlp_forward(net, feat, {}, {next.at(i, k), priors.points});
    }
  }
}

}  // namespace

modem::SoftSymbols deepsic_infer(const DeepSicParams& params, std::span<const Cx> outputs,
                                 std::size_t times) {
  check_outputs(params.antennas, outputs, times);
  auto priors = modem::SoftSymbols::uniform(params.users, times, params.points);
  auto next = priors;
  std::vector<double> feat(params.feature_size());
  std::vector<const nn::NetworkParams*> nets;
  for (const auto& m : params.modules) nets.push_back(&m);
  for (std::size_t q = 0; q < params.iterations; ++q) {
    sweep(nets, params.users, params.iterations, q, outputs, times, params.antennas, priors, next,
          feat);
    std::swap(priors, next);
  }
  return priors;
}

modem::SoftSymbols bayesian_infer(const DeepSicPosterior& post, std::span<const Cx> outputs,
                                  std::size_t times, std::size_t ensemble, std::uint64_t seed) {
  check_outputs(post.antennas, outputs, times);
  if (ensemble < 1) throw InvalidInput("ensemble size must be at least 1");
  modem::SoftSymbols acc{post.users, times, post.points, {}};
  acc.data.assign(post.users * times * post.points, 0.0);

  DeepSicParams member;
  member.users = post.users;
  member.antennas = post.antennas;
  member.iterations = post.iterations;
  member.points = post.points;
  member.modules.resize(post.modules.size());
  for (std::size_t j = 0; j < ensemble; ++j) {
    for (std::size_t k = 0; k < post.users; ++k) {
      for (std::size_t q = 0; q < post.iterations; ++q) {
        std::mt19937_64 rng(derive_seed(seed, "member", {k, q, j}));
        member.module(k, q) = nn::sample_dropout_realization(post.module(k, q), rng);
      }
    }
    const auto out = deepsic_infer(member, outputs, times);
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += out.data[i];
  }
  for (auto& x : acc.data) x /= static_cast<double>(ensemble);
  return acc;
}

modem::SoftSymbols modular_bayesian_infer(const DeepSicPosterior& post,
                                          std::span<const Cx> outputs, std::size_t times,
                                          std::size_t ensemble, std::uint64_t seed) {
  check_outputs(post.antennas, outputs, times);
  if (ensemble < 1) throw InvalidInput("ensemble size must be at least 1");
  auto priors = modem::SoftSymbols::uniform(post.users, times, post.points);
  auto next = priors;
  std::vector<double> feat(2 * post.antennas + (post.users - 1) * post.points);
  std::vector<double> probs(post.points);
  for (std::size_t q = 0; q < post.iterations; ++q) {
    for (std::size_t k = 0; k < post.users; ++k) {
      for (std::size_t i = 0; i < times; ++i) {
        double* dst = next.at(i, k);
        for (std::size_t s = 0; s < post.points; ++s) dst[s] = 0.0;
      }
      for (std::size_t j = 0; j < ensemble; ++j) {
        std::mt19937_64 rng(derive_seed(seed, "member", {k, q, j}));
        const auto realized = nn::sample_dropout_realization(post.module(k, q), rng);
        for (std::size_t i = 0; i < times; ++i) {
          detail::assemble_features(outputs.subspan(i * post.antennas, post.antennas), priors, i,
                                    k, feat);
          nn::mlp_forward(realized, feat, {}, probs);
          double* dst = next.at(i, k);
          for (std::size_t s = 0; s < post.points; ++s) dst[s] += probs[s];
        }
      }
      for (std::size_t i = 0; i < times; ++i) {
        double* dst = next.at(i, k);
        for (std::size_t s = 0; s < post.points; ++s) dst[s] /= static_cast<double>(ensemble);
      }
    }
    std::swap(priors, next);
  }
  return priors;
}

std::vector<std::size_t> hard_decisions(const modem::SoftSymbols& soft) {
  std::vector<std::size_t> out(soft.times * soft.users, 0);
  for (std::size_t i = 0; i < soft.times; ++i) {
    for (std::size_t k = 0; k < soft.users; ++k) {
      const double* p = soft.at(i, k);
      std::size_t best = 0;
      for (std::size_t s = 1; s < soft.points; ++s) {
        if (p[s] > p[best]) best = s;
      }
      out[i * soft.users + k] = best;
    }
  }
  return out;
}

namespace {

namespace fs = std::filesystem;

std::string module_path(const std::string& dir, std::size_t k, std::size_t q, bool logits) {
  return dir + "/deepsic_k" + std::to_string(k) + "_q" + std::to_string(q) +
         (logits ? "_logits.bin" : ".bin");
}

void write_manifest(const std::string& dir, const std::map<std::string, std::string>& kv) {
  std::ofstream f(dir + "/manifest.txt");
  if (!f) throw IoError("cannot write " + dir + "/manifest.txt");
  for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
}

std::map<std::string, std::string> read_manifest(const std::string& dir) {
  std::ifstream f(dir + "/manifest.txt");
  if (!f) throw IoError("cannot read " + dir + "/manifest.txt");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed manifest line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::size_t manifest_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw IoError("manifest missing key " + key);
  return static_cast<std::size_t>(std::stoull(it->second));
}

void write_logits(const std::string& path, std::span<const double> logits) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(logits.size());
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  f.write(reinterpret_cast<const char*>(logits.data()),
          static_cast<std::streamsize>(logits.size() * sizeof(double)));
  if (!f) throw IoError("short write to " + path);
}

std::vector<double> read_logits(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::uint32_t n = 0;
  f.read(reinterpret_cast<char*>(&n), sizeof n);
  std::vector<double> logits(n);
  f.read(reinterpret_cast<char*>(logits.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!f) throw IoError("truncated file " + path);
  return logits;
}

}  // namespace

void save_deepsic(const DeepSicParams& params, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < params.users; ++k) {
    for (std::size_t q = 0; q < params.iterations; ++q) {
      nn::save_network(params.module(k, q), module_path(dir, k, q, false));
    }
  }
  write_manifest(dir, {{"kind", "frequentist"},
                       {"users", std::to_string(params.users)},
                       {"antennas", std::to_string(params.antennas)},
                       {"iterations", std::to_string(params.iterations)},
                       {"points", std::to_string(params.points)}});
}

DeepSicParams load_deepsic(const std::string& dir) {
  const auto kv = read_manifest(dir);
  DeepSicParams p;
  p.users = manifest_size(kv, "users");
  p.antennas = manifest_size(kv, "antennas");
  p.iterations = manifest_size(kv, "iterations");
  p.points = manifest_size(kv, "points");
  p.modules.resize(p.users * p.iterations);
  for (std::size_t k = 0; k < p.users; ++k) {
    for (std::size_t q = 0; q < p.iterations; ++q) {
      p.module(k, q) = nn::load_network(module_path(dir, k, q, false));
    }
  }
  return p;
}

void save_deepsic_posterior(const DeepSicPosterior& post, const std::string& dir) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < post.users; ++k) {
    for (std::size_t q = 0; q < post.iterations; ++q) {
      nn::save_network(post.module(k, q).nominal, module_path(dir, k, q, false));
      write_logits(module_path(dir, k, q, true), post.module(k, q).dropout_logits);
    }
  }
  const auto& first = post.modules.front();
  write_manifest(dir,
                 {{"kind", post.mode == DeepSicPosterior::Mode::end_to_end ? "end_to_end"
                                                                           : "modular"},
                  {"users", std::to_string(post.users)},
                  {"antennas", std::to_string(post.antennas)},
                  {"iterations", std::to_string(post.iterations)},
                  {"points", std::to_string(post.points)},
                  {"ensemble", std::to_string(post.ensemble)},
                  {"temperature", std::to_string(first.temperature)},
                  {"prior_stddev", std::to_string(first.prior_stddev)}});
}

DeepSicPosterior load_deepsic_posterior(const std::string& dir) {
  const auto kv = read_manifest(dir);
  DeepSicPosterior p;
  const auto kind = kv.find("kind");
  if (kind == kv.end()) throw IoError("manifest missing key kind");
  if (kind->second == "end_to_end") {
    p.mode = DeepSicPosterior::Mode::end_to_end;
  } else if (kind->second == "modular") {
    p.mode = DeepSicPosterior::Mode::modular;
  } else {
    throw IoError("unknown posterior kind " + kind->second);
  }
  p.users = manifest_size(kv, "users");
  p.antennas = manifest_size(kv, "antennas");
  p.iterations = manifest_size(kv, "iterations");
  p.points = manifest_size(kv, "points");
  p.ensemble = manifest_size(kv, "ensemble");
  const double temperature = std::stod(kv.at("temperature"));
  const double prior_stddev = std::stod(kv.at("prior_stddev"));
  p.modules.resize(p.users * p.iterations);
  for (std::size_t k = 0; k < p.users; ++k) {
    for (std::size_t q = 0; q < p.iterations; ++q) {
      auto& m = p.module(k, q);
      m.nominal = nn::load_network(module_path(dir, k, q, false));
      m.dropout_logits = read_logits(module_path(dir, k, q, true));
      if (m.dropout_logits.size() != m.nominal.hidden_units()) {
        throw IoError("logit count mismatch in " + module_path(dir, k, q, true));
      }
      m.temperature = temperature;
      m.prior_stddev = prior_stddev;
    }
  }
  return p;
}

}  // namespace bayesrx::deepsic
