#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include "common/errors.hpp"
#include "common/seeds.hpp"
#include "deepsic/deepsic.hpp"
#include "deepsic/deepsic_train.hpp"
#include "doctest.h"
#include "modem/block.hpp"
#include "modem/channel.hpp"
#include "modem/constellation.hpp"
#include "support/checks.hpp"

using namespace bayesrx;
using deepsic::Cx;

namespace {

const modem::Constellation& qpsk() {
  return modem::constellation(modem::ConstellationKind::qpsk);
}

modem::ChannelMatrix identity_channel(std::size_t n) {
  modem::ChannelMatrix h{n, n, std::vector<Cx>(n * n, Cx{0.0, 0.0})};
  for (std::size_t i = 0; i < n; ++i) h.at(i, i) = Cx{1.0, 0.0};
  return h;
}

modem::TransmissionBlock qpsk_block(std::size_t users, std::size_t pilots, double snr_db,
                                    std::uint64_t seed,
                                    const modem::ChannelMatrix* h = nullptr) {
  modem::BlockConfig cfg;
  cfg.users = users;
  cfg.antennas = users;
  cfg.constellation = &qpsk();
  cfg.pilot_count = pilots;
  cfg.info_count = 4;
  cfg.snr_db = snr_db;
  std::mt19937_64 rng(seed);
  const auto def = modem::exp_decay_matrix(users, users);
  return modem::make_block(cfg, h ? *h : def, rng);
}

std::vector<Cx> random_outputs(std::size_t times, std::size_t antennas, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Cx> y(times * antennas);
  for (auto& v : y) v = Cx{g(rng), g(rng)};
  return y;
}

void zero_all(deepsic::DeepSicParams& params) {
  for (auto& net : params.modules) {
    for (auto& w : net.weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);
  }
}

double symbol_error_rate(const modem::SoftSymbols& soft, const modem::TransmissionBlock& block,
                         std::size_t times) {
  const auto dec = deepsic::hard_decisions(soft);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < times * block.users; ++i) errors += (dec[i] != block.symbols[i]);
  return static_cast<double>(errors) / static_cast<double>(times * block.users);
}

bool same_network(const nn::NetworkParams& a, const nn::NetworkParams& b) {
  return a.layer_sizes == b.layer_sizes && a.weights == b.weights && a.biases == b.biases;
}

}  // namespace

TEST_CASE("zero-weight grids output the uniform distribution at every stage") {
  auto params = deepsic::make_deepsic(3, 3, 2, 4, 1);
  zero_all(params);
  const auto y = random_outputs(5, 3, 2);
  const auto soft = deepsic::deepsic_infer(params, y, 5);
  for (double p : soft.data) CHECK(p == 0.25);
}

TEST_CASE("four-user grid returns one length-four vector per user") {
  const auto params = deepsic::make_deepsic(4, 4, 3, 4, 3);
  CHECK(params.modules.size() == 12);
  CHECK(params.feature_size() == 2 * 4 + 3 * 4);
  for (const auto& net : params.modules) {
    CHECK(net.input_size() == params.feature_size());
    CHECK(net.hidden_units() == deepsic::kHiddenUnits);
    CHECK(net.output_size() == 4);
  }

  const std::size_t times = 5;
  const auto y = random_outputs(times, 4, 4);
  const auto soft = deepsic::deepsic_infer(params, y, times);
  CHECK(soft.users == 4);
  CHECK(soft.times == times);
  CHECK(soft.points == 4);
  CHECK(soft.data.size() == times * 4 * 4);
  for (std::size_t i = 0; i < times; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      const double* p = soft.at(i, k);
      double sum = 0.0;
      for (std::size_t s = 0; s < 4; ++s) {
        CHECK(p[s] > 0.0);
        sum += p[s];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("features are received samples then the other users' estimates") {
  modem::SoftSymbols priors = modem::SoftSymbols::uniform(3, 2, 4);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t s = 0; s < 4; ++s) {
      priors.at(1, k)[s] = static_cast<double>(10 * k + s);
    }
  }
  const std::vector<Cx> y{{1.5, -2.5}, {3.5, 4.5}};
  std::vector<double> feat(2 * 2 + 2 * 4);
  deepsic::detail::assemble_features(y, priors, 1, 1, feat);
  const std::vector<double> expected{1.5, 3.5,  -2.5, 4.5,  0.0,  1.0,
                                     2.0, 3.0,  20.0, 21.0, 22.0, 23.0};
  CHECK(feat == expected);
}

TEST_CASE("manual sweep replay reproduces the iterative detector") {
  const std::size_t users = 2, antennas = 2, iters = 3, points = 4, times = 4;
  const auto params = deepsic::make_deepsic(users, antennas, iters, points, 5);
  const auto y = random_outputs(times, antennas, 6);

  auto priors = modem::SoftSymbols::uniform(users, times, points);
  std::vector<double> feat(params.feature_size());
  for (std::size_t q = 0; q < iters; ++q) {
    auto next = priors;
    for (std::size_t k = 0; k < users; ++k) {
      for (std::size_t i = 0; i < times; ++i) {
        deepsic::detail::assemble_features({y.data() + i * antennas, antennas}, priors, i, k,
                                           feat);
        nn::mlp_forward(params.module(k, q), feat, {}, {next.at(i, k), points});
      }
    }
    priors = std::move(next);
  }
  CHECK(deepsic::deepsic_infer(params, y, times).data == priors.data);
}

TEST_CASE("a single user grid reduces to its last module") {
  const auto params = deepsic::make_deepsic(1, 2, 3, 4, 7);
  const auto y = random_outputs(3, 2, 8);
  const auto soft = deepsic::deepsic_infer(params, y, 3);
  std::vector<double> feat(4), probs(4);
  for (std::size_t i = 0; i < 3; ++i) {
    feat[0] = y[i * 2].real();
    feat[1] = y[i * 2 + 1].real();
    feat[2] = y[i * 2].imag();
    feat[3] = y[i * 2 + 1].imag();
    nn::mlp_forward(params.module(0, 2), feat, {}, probs);
    for (std::size_t s = 0; s < 4; ++s) CHECK(soft.at(i, 0)[s] == probs[s]);
  }
}

TEST_CASE("swapping the two users' module rows swaps their outputs") {
  const auto params = deepsic::make_deepsic(2, 2, 3, 4, 11);
  auto swapped = params;
  for (std::size_t q = 0; q < 3; ++q) {
    swapped.module(0, q) = params.module(1, q);
    swapped.module(1, q) = params.module(0, q);
  }
  const auto y = random_outputs(4, 2, 12);
  const auto a = deepsic::deepsic_infer(params, y, 4);
  const auto b = deepsic::deepsic_infer(swapped, y, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t s = 0; s < 4; ++s) {
      CHECK(a.at(i, 0)[s] == b.at(i, 1)[s]);
      CHECK(a.at(i, 1)[s] == b.at(i, 0)[s]);
    }
  }
}

TEST_CASE("argmax decisions break ties toward the lowest point") {
  modem::SoftSymbols soft{1, 2, 4, {0.1, 0.6, 0.2, 0.1, 0.3, 0.3, 0.3, 0.1}};
  CHECK(deepsic::hard_decisions(soft) == std::vector<std::size_t>{1, 0});
}

TEST_CASE("inference validates its inputs") {
  const auto params = deepsic::make_deepsic(2, 2, 1, 4, 13);
  const auto y = random_outputs(3, 2, 14);
  CHECK_THROWS_AS((void)deepsic::deepsic_infer(params, {y.data(), 5}, 3), InvalidInput);
  CHECK_THROWS_AS((void)deepsic::make_deepsic(0, 2, 1, 4, 0), InvalidInput);

  auto post = deepsic::DeepSicPosterior{};
  post.users = 2;
  post.antennas = 2;
  post.iterations = 1;
  post.points = 4;
  CHECK_THROWS_AS((void)deepsic::bayesian_infer(post, y, 3, 0, 1), InvalidInput);
}

TEST_CASE("sequential training separates users on an orthogonal noiseless channel") {
  const auto h = identity_channel(2);
  const auto block = qpsk_block(2, 256, std::numeric_limits<double>::infinity(), 21, &h);
  deepsic::DeepSicTrainOptions opts;
  opts.adam_steps = 300;
  opts.seed = 21;
  const auto params = deepsic::train_deepsic_frequentist(block, 1, opts);
  const std::span<const Cx> pilots{block.outputs.data(), block.pilot_count * block.antennas};
  const auto soft = deepsic::deepsic_infer(params, pilots, block.pilot_count);
  CHECK(symbol_error_rate(soft, block, block.pilot_count) < 0.01);
}

TEST_CASE("training requires pilot symbols") {
  modem::TransmissionBlock block;
  block.users = 2;
  block.antennas = 2;
  block.pilot_count = 0;
  block.constellation = &qpsk();
  deepsic::DeepSicTrainOptions opts;
  CHECK_THROWS_AS((void)deepsic::train_deepsic_frequentist(block, 1, opts), ConfigError);
  CHECK_THROWS_AS((void)deepsic::train_deepsic_bayesian_e2e(block, 1, opts), ConfigError);
  CHECK_THROWS_AS((void)deepsic::train_deepsic_modular_bayesian(block, 1, opts), ConfigError);
  CHECK_THROWS_AS((void)deepsic::train_blackbox(block, opts), ConfigError);
}

TEST_CASE("per-module losses settle within the final hundred steps") {
  std::size_t settled = 0, total = 0;
  for (int seed = 0; seed < 5; ++seed) {
    const auto block = qpsk_block(2, 48, 8.0, 30 + static_cast<std::uint64_t>(seed));
    std::vector<std::vector<double>> traces;
    deepsic::DeepSicTrainOptions opts;
    opts.adam_steps = 150;
    opts.seed = static_cast<std::uint64_t>(seed);
    opts.module_traces = &traces;
    (void)deepsic::train_deepsic_frequentist(block, 2, opts);
    REQUIRE(traces.size() == 4);
    for (const auto& tr : traces) {
      REQUIRE(tr.size() == 150);
      ++total;
      if (tr.back() <= tr[tr.size() - 101] + 1e-9) ++settled;
    }
  }
  CHECK(settled * 10 >= total * 9);
}

TEST_CASE("joint free-energy gradients match finite differences") {
  const auto block = qpsk_block(2, 3, 8.0, 40);
  const std::size_t iters = 2;
  deepsic::DeepSicTrainOptions opts;
  opts.seed = 40;

  auto nets = deepsic::make_deepsic(2, 2, iters, 4, opts.seed);
  deepsic::DeepSicPosterior post;
  post.users = 2;
  post.antennas = 2;
  post.iterations = iters;
  post.points = 4;
  for (auto& net : nets.modules) post.modules.push_back(nn::make_posterior(std::move(net), 0.2));

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  std::vector<std::vector<double>> uniforms(post.modules.size());
  for (auto& row : uniforms) {
    row.resize(deepsic::kHiddenUnits);
    for (auto& x : row) x = u(rng);
  }
  const double beta = 50.0;
  const std::span<const Cx> pilots{block.outputs.data(), block.pilot_count * block.antennas};
  const std::span<const std::size_t> labels{block.symbols.data(),
                                            block.pilot_count * block.users};

  const auto res =
      deepsic::deepsic_e2e_loss_grads(post, uniforms, pilots, block.pilot_count, labels, beta);
  std::vector<double*> ptrs;
  std::vector<double> analytic;
  for (std::size_t m = 0; m < post.modules.size(); ++m) {
    auto& net = post.modules[m].nominal;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
        ptrs.push_back(&net.weights[l][i]);
        analytic.push_back(res.grads[m].weights[l][i]);
      }
      for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
        ptrs.push_back(&net.biases[l][i]);
        analytic.push_back(res.grads[m].biases[l][i]);
      }
    }
    for (std::size_t i = 0; i < post.modules[m].dropout_logits.size(); ++i) {
      ptrs.push_back(&post.modules[m].dropout_logits[i]);
      analytic.push_back(res.dlogits[m][i]);
    }
  }
  const auto loss = [&] {
    const auto r =
        deepsic::deepsic_e2e_loss_grads(post, uniforms, pilots, block.pilot_count, labels, beta);
    return r.loss + r.kl;
  };
  const auto rep = testsupport::fd_compare(ptrs, analytic, loss, 1e-5);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("joint training lowers the free energy") {
  const auto block = qpsk_block(2, 64, 10.0, 50);
  std::vector<double> trace;
  deepsic::DeepSicTrainOptions opts;
  opts.adam_steps = 120;
  opts.seed = 50;
  opts.loss_trace = &trace;
  const auto post = deepsic::train_deepsic_bayesian_e2e(block, 2, opts);
  REQUIRE(trace.size() == 120);
  CHECK(trace.back() < trace.front());
  CHECK(post.mode == deepsic::DeepSicPosterior::Mode::end_to_end);
  CHECK(post.modules.size() == 4);
}

TEST_CASE("flat prior and vanishing dropout recover sequential training") {
  const auto block = qpsk_block(2, 48, 12.0, 60);
  deepsic::DeepSicTrainOptions opts;
  opts.adam_steps = 25;
  opts.seed = 60;
  opts.beta = std::numeric_limits<double>::infinity();
  opts.init_drop_prob = 1e-15;
  const auto freq = deepsic::train_deepsic_frequentist(block, 1, opts);
  const auto post = deepsic::train_deepsic_bayesian_e2e(block, 1, opts);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(same_network(freq.module(k, 0), post.module(k, 0).nominal));
  }
}

TEST_CASE("single-iteration modular and joint training coincide") {
  const auto block = qpsk_block(2, 32, 10.0, 70);
  deepsic::DeepSicTrainOptions opts;
  opts.adam_steps = 30;
  opts.seed = 3;
  const auto joint = deepsic::train_deepsic_bayesian_e2e(block, 1, opts);
  const auto modular = deepsic::train_deepsic_modular_bayesian(block, 1, opts);
  REQUIRE(joint.modules.size() == modular.modules.size());
  for (std::size_t m = 0; m < joint.modules.size(); ++m) {
    CHECK(same_network(joint.modules[m].nominal, modular.modules[m].nominal));
    CHECK(joint.modules[m].dropout_logits == modular.modules[m].dropout_logits);
  }
}

TEST_CASE("modular training keeps one posterior per module") {
  const auto block = qpsk_block(2, 16, 10.0, 80);
  deepsic::DeepSicTrainOptions opts;
  opts.adam_steps = 3;
  opts.ensemble = 4;
  const auto post = deepsic::train_deepsic_modular_bayesian(block, 3, opts);
  CHECK(post.mode == deepsic::DeepSicPosterior::Mode::modular);
  CHECK(post.modules.size() == 6);
  CHECK(post.ensemble == 4);
  for (const auto& mod : post.modules) {
    CHECK(mod.dropout_logits.size() == deepsic::kHiddenUnits);
  }
}

TEST_CASE("single member never-drop ensembles reproduce the plain detector") {
  auto nets = deepsic::make_deepsic(2, 2, 2, 4, 90);
  const auto plain = nets;
  deepsic::DeepSicPosterior post;
  post.users = 2;
  post.antennas = 2;
  post.iterations = 2;
  post.points = 4;
  for (auto& net : nets.modules) {
    auto p = nn::make_posterior(std::move(net), 0.1);
    std::fill(p.dropout_logits.begin(), p.dropout_logits.end(),
              -std::numeric_limits<double>::infinity());
    post.modules.push_back(std::move(p));
  }
  const auto y = random_outputs(4, 2, 91);
  const auto base = deepsic::deepsic_infer(plain, y, 4);
  CHECK(deepsic::bayesian_infer(post, y, 4, 1, 5).data == base.data);
  CHECK(deepsic::modular_bayesian_infer(post, y, 4, 1, 5).data == base.data);
}

TEST_CASE("ensemble average equals the recomputed member mean") {
  auto nets = deepsic::make_deepsic(2, 2, 2, 4, 100);
  deepsic::DeepSicPosterior post;
  post.users = 2;
  post.antennas = 2;
  post.iterations = 2;
  post.points = 4;
  for (auto& net : nets.modules) post.modules.push_back(nn::make_posterior(std::move(net), 0.3));

  const auto y = random_outputs(3, 2, 101);
  const std::uint64_t seed = 555;
  const std::size_t ensemble = 5;

  modem::SoftSymbols mean{2, 3, 4, std::vector<double>(2 * 3 * 4, 0.0)};
  deepsic::DeepSicParams member;
  member.users = 2;
  member.antennas = 2;
  member.iterations = 2;
  member.points = 4;
  member.modules.resize(4);
  for (std::size_t j = 0; j < ensemble; ++j) {
    for (std::size_t k = 0; k < 2; ++k) {
      for (std::size_t q = 0; q < 2; ++q) {
        std::mt19937_64 rng(derive_seed(seed, "member", {k, q, j}));
        member.module(k, q) = nn::sample_dropout_realization(post.module(k, q), rng);
      }
    }
    const auto out = deepsic::deepsic_infer(member, y, 3);
    for (std::size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += out.data[i];
  }
  for (auto& x : mean.data) x /= static_cast<double>(ensemble);
  CHECK(deepsic::bayesian_infer(post, y, 3, ensemble, seed).data == mean.data);
}

TEST_CASE("single-iteration modular and joint ensembles coincide") {
  auto nets = deepsic::make_deepsic(3, 3, 1, 4, 110);
  deepsic::DeepSicPosterior post;
  post.users = 3;
  post.antennas = 3;
  post.iterations = 1;
  post.points = 4;
  for (auto& net : nets.modules) post.modules.push_back(nn::make_posterior(std::move(net), 0.25));
  const auto y = random_outputs(4, 3, 111);
  const auto a = deepsic::bayesian_infer(post, y, 4, 4, 777);
  const auto b = deepsic::modular_bayesian_infer(post, y, 4, 4, 777);
  CHECK(a.data == b.data);
}

TEST_CASE("black-box detector separates users on a noiseless channel") {
  const auto h = identity_channel(2);
  const auto block = qpsk_block(2, 256, std::numeric_limits<double>::infinity(), 120, &h);
  deepsic::DeepSicTrainOptions opts;
  opts.adam_steps = 400;
  opts.seed = 120;
  const auto net = deepsic::train_blackbox(block, opts);
  const std::span<const Cx> pilots{block.outputs.data(), block.pilot_count * block.antennas};
  const auto soft = deepsic::blackbox_detect(net, pilots, block.pilot_count, 2);
  for (std::size_t i = 0; i < block.pilot_count; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      double sum = 0.0;
      for (std::size_t s = 0; s < 4; ++s) sum += soft.at(i, k)[s];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK(symbol_error_rate(soft, block, block.pilot_count) < 0.05);

  CHECK_THROWS_AS((void)deepsic::blackbox_detect(net, pilots, block.pilot_count, 3),
                  InvalidInput);
  CHECK_THROWS_AS((void)deepsic::blackbox_detect(net, {pilots.data(), 3}, block.pilot_count, 2),
                  InvalidInput);
}

TEST_CASE("training is reproducible for a fixed seed") {
  const auto block = qpsk_block(2, 24, 10.0, 130);
  deepsic::DeepSicTrainOptions opts;
  opts.adam_steps = 20;
  opts.seed = 9;
  const auto a = deepsic::train_deepsic_frequentist(block, 2, opts);
  const auto b = deepsic::train_deepsic_frequentist(block, 2, opts);
  for (std::size_t m = 0; m < a.modules.size(); ++m) {
    CHECK(same_network(a.modules[m], b.modules[m]));
  }
  const auto pa = deepsic::train_deepsic_modular_bayesian(block, 2, opts);
  const auto pb = deepsic::train_deepsic_modular_bayesian(block, 2, opts);
  for (std::size_t m = 0; m < pa.modules.size(); ++m) {
    CHECK(same_network(pa.modules[m].nominal, pb.modules[m].nominal));
    CHECK(pa.modules[m].dropout_logits == pb.modules[m].dropout_logits);
  }
}

TEST_CASE("grid snapshots round trip bit exactly") {
  const auto params = deepsic::make_deepsic(2, 3, 2, 4, 140);
  const std::string dir = "deepsic_snapshot_test";
  deepsic::save_deepsic(params, dir);
  const auto loaded = deepsic::load_deepsic(dir);
  CHECK(loaded.users == params.users);
  CHECK(loaded.antennas == params.antennas);
  CHECK(loaded.iterations == params.iterations);
  CHECK(loaded.points == params.points);
  REQUIRE(loaded.modules.size() == params.modules.size());
  for (std::size_t m = 0; m < params.modules.size(); ++m) {
    CHECK(same_network(loaded.modules[m], params.modules[m]));
  }
  std::filesystem::remove_all(dir);

  auto nets = deepsic::make_deepsic(2, 2, 2, 4, 141);
  deepsic::DeepSicPosterior post;
  post.mode = deepsic::DeepSicPosterior::Mode::modular;
  post.users = 2;
  post.antennas = 2;
  post.iterations = 2;
  post.points = 4;
  post.ensemble = 7;
  std::mt19937_64 rng(142);
  std::uniform_real_distribution<double> u(-3.0, -1.0);
  for (auto& net : nets.modules) {
    auto p = nn::make_posterior(std::move(net), 0.1);
    for (auto& x : p.dropout_logits) x = u(rng);
    post.modules.push_back(std::move(p));
  }
  const std::string pdir = "deepsic_posterior_snapshot_test";
  deepsic::save_deepsic_posterior(post, pdir);
  const auto pl = deepsic::load_deepsic_posterior(pdir);
  CHECK(pl.mode == post.mode);
  CHECK(pl.ensemble == post.ensemble);
  REQUIRE(pl.modules.size() == post.modules.size());
  for (std::size_t m = 0; m < post.modules.size(); ++m) {
    CHECK(same_network(pl.modules[m].nominal, post.modules[m].nominal));
    CHECK(pl.modules[m].dropout_logits == post.modules[m].dropout_logits);
  }
  std::filesystem::remove_all(pdir);
}
