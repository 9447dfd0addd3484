#include "wbp/wbp_train.hpp"

#include <cmath>
#include <random>

#include "common/errors.hpp"
#include "common/seeds.hpp"
#include "nn/adam.hpp"
#include "nn/dropout.hpp"

namespace bayesrx::wbp {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool clamped(double x) { return std::abs(x) >= kMessageClip; }

// dCE/dsoft for CE(bit; p1 = (1+soft)/2). Soft values are clamped away from
// +-1, so the probabilities stay clear of zero.
double ce_and_grad(double soft, std::uint8_t bit, double scale, double& loss_out) {
  const double p1 = 0.5 * (1.0 + soft);
  if (bit) {
    loss_out += -std::log(p1) * scale;
    return scale * (-0.5 / p1);
  }
  loss_out += -std::log(1.0 - p1) * scale;
  return scale * (0.5 / (1.0 - p1));
}

// Unrolled per-frame state for one set of effective weights.
struct Unrolled {
  std::vector<std::vector<double>> m_vc, m_cv, prod;  // [q][edge]
  std::vector<std::vector<double>> out;               // [q][var]

  void resize(std::size_t iters, std::size_t edges, std::size_t vars) {
    m_vc.assign(iters, std::vector<double>(edges));
    m_cv.assign(iters, std::vector<double>(edges));
    prod.assign(iters, std::vector<double>(edges));
    out.assign(iters, std::vector<double>(vars));
  }
};

void forward_frame(const code::TannerGraph& g, std::span<const std::vector<double>> w_eff,
                   std::span<const double> llr, Unrolled& st) {
  const std::size_t iters = w_eff.size();
  const std::size_t edges = g.edge_count();
  static thread_local std::vector<double> zeros;
  zeros.assign(edges, 0.0);
  for (std::size_t q = 0; q < iters; ++q) {
    const auto& prev = q == 0 ? zeros : st.m_cv[q - 1];
    detail::var_to_check(llr, w_eff[q], prev, g, st.m_vc[q]);
    detail::check_to_var(st.m_vc[q], g, st.prod[q], st.m_cv[q]);
    detail::marginalize(llr, w_eff[q], st.m_cv[q], g, st.out[q]);
  }
}

// Accumulates multi-loss gradients w.r.t. the effective weights.
double backward_frame(const code::TannerGraph& g, std::span<const std::vector<double>> w_eff,
                      const WbpFrame& frame, double scale, const Unrolled& st,
                      std::vector<std::vector<double>>& dw) {
  const std::size_t iters = w_eff.size();
  const std::size_t edges = g.edge_count();
  const std::size_t vars = g.var_count;
  double loss = 0.0;

  static thread_local std::vector<double> d_mcv, d_mvc, d_a, next_d_mcv, zeros;
  static thread_local std::vector<double> ppre, tpre, psuf, tsuf;
  d_mcv.assign(edges, 0.0);
  zeros.assign(edges, 0.0);

  for (std::size_t q = iters; q-- > 0;) {
    // Per-iteration soft output.
    for (std::size_t v = 0; v < vars; ++v) {
      const double o = st.out[q][v];
      const double d_out = ce_and_grad(o, frame.bits[v], scale, loss);
      if (clamped(o)) continue;
      const double d_b = d_out * 0.5 * (1.0 - o * o);
      for (std::size_t e : g.var_edges[v]) {
        dw[q][e] += d_b * st.m_cv[q][e];
        d_mcv[e] += d_b * w_eff[q][e];
      }
    }

    // Check update: d_mcv -> d_mvc via exclusive-product jacobian.
    d_mvc.assign(edges, 0.0);
    for (std::size_t h = 0; h < g.check_count; ++h) {
      const auto& ce = g.check_edges[h];
      const std::size_t d = ce.size();
      ppre.resize(d + 1);
      tpre.resize(d + 1);
      psuf.resize(d + 1);
      tsuf.resize(d + 1);
      ppre[0] = 1.0;
      tpre[0] = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double p = st.prod[q][ce[i]];
        const double gdp = clamped(p) ? 0.0 : d_mcv[ce[i]] * 2.0 / (1.0 - p * p);
        const double m = st.m_vc[q][ce[i]];
        ppre[i + 1] = ppre[i] * m;
        tpre[i + 1] = tpre[i] * m + ppre[i] * gdp;
      }
      psuf[d] = 1.0;
      tsuf[d] = 0.0;
      for (std::size_t i = d; i-- > 0;) {
        const double p = st.prod[q][ce[i]];
        const double gdp = clamped(p) ? 0.0 : d_mcv[ce[i]] * 2.0 / (1.0 - p * p);
        const double m = st.m_vc[q][ce[i]];
        psuf[i] = psuf[i + 1] * m;
        tsuf[i] = tsuf[i + 1] * m + psuf[i + 1] * gdp;
      }
      for (std::size_t i = 0; i < d; ++i) {
        d_mvc[ce[i]] = tpre[i] * psuf[i + 1] + ppre[i] * tsuf[i + 1];
      }
    }

    // Variable update: d_mvc -> dw[q] and the previous iteration's d_mcv.
    const auto& prev_mcv = q == 0 ? zeros : st.m_cv[q - 1];
    next_d_mcv.assign(edges, 0.0);
    d_a.assign(edges, 0.0);
    for (std::size_t v = 0; v < vars; ++v) {
      double s_da = 0.0;
      for (std::size_t e : g.var_edges[v]) {
        const double t = st.m_vc[q][e];
        d_a[e] = clamped(t) ? 0.0 : d_mvc[e] * 0.5 * (1.0 - t * t);
        s_da += d_a[e];
      }
      for (std::size_t e : g.var_edges[v]) {
        const double contrib = s_da - d_a[e];
        dw[q][e] += contrib * prev_mcv[e];
        if (q > 0) next_d_mcv[e] += contrib * w_eff[q][e];
      }
    }
    std::swap(d_mcv, next_d_mcv);
  }
  return loss;
}

std::vector<std::vector<double>> multiloss_core(const code::TannerGraph& g,
                                                std::span<const std::vector<double>> w_eff,
                                                std::span<const WbpFrame> frames,
                                                double& loss_out) {
  if (frames.empty()) throw InvalidInput("no decoder training frames");
  const std::size_t iters = w_eff.size();
  const std::size_t edges = g.edge_count();
  std::vector<std::vector<double>> dw(iters, std::vector<double>(edges, 0.0));
  const double scale = 1.0 / (static_cast<double>(frames.size()) * static_cast<double>(g.var_count));
  Unrolled st;
  st.resize(iters, edges, g.var_count);
  loss_out = 0.0;
  for (const auto& frame : frames) {
    if (frame.llr.size() != g.var_count || frame.bits.size() != g.var_count) {
      throw InvalidInput("frame size mismatch");
    }
    forward_frame(g, w_eff, frame.llr, st);
    loss_out += backward_frame(g, w_eff, frame, scale, st, dw);
  }
  return dw;
}

void check_divergence(double loss) {
  if (!std::isfinite(loss)) throw TrainingError("decoder training diverged (non-finite loss)");
}

std::vector<std::vector<double>> draw_uniforms(std::size_t iterations, std::size_t edges,
                                               std::uint64_t seed, std::size_t step,
                                               std::size_t q_offset = 0) {
  std::vector<std::vector<double>> u(iterations, std::vector<double>(edges));
  for (std::size_t q = 0; q < iterations; ++q) {
    std::mt19937_64 rng(derive_seed(seed, "wbp_mask", {q_offset + q, step}));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (std::size_t e = 0; e < edges; ++e) {
      double x = uni(rng);
      if (x < 1e-12) x = 1e-12;
      if (x > 1.0 - 1e-12) x = 1.0 - 1e-12;
      u[q][e] = x;
    }
  }
  return u;
}

// KL of one iteration's weight row; adds gradients in place.
double kl_row(std::span<const double> w, std::span<const double> logits, double beta,
              double prior_stddev, std::span<double> dw, std::span<double> dlog) {
  const double inv_beta = 1.0 / beta;
  const double var2 = 2.0 * prior_stddev * prior_stddev;
  double val = 0.0;
  for (std::size_t e = 0; e < w.size(); ++e) {
    const double p = sigmoid(logits[e]);
    const double n2 = w[e] * w[e];
    double hb = 0.0;
    if (p > 0.0 && p < 1.0) hb = -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
    val += inv_beta * ((1.0 - p) * n2 / var2 - hb);
    dw[e] += inv_beta * (1.0 - p) * w[e] / (prior_stddev * prior_stddev);
    const double pq = p * (1.0 - p);
    dlog[e] += pq == 0.0 ? 0.0 : inv_beta * pq * (logits[e] - n2 / var2);
  }
  return val;
}

}  // namespace

WbpLossGrads wbp_multiloss_grads(const code::TannerGraph& g, const WbpParams& params,
                                 std::span<const WbpFrame> frames) {
  WbpLossGrads out;
  out.dweights = multiloss_core(g, params.weights, frames, out.loss);
  return out;
}

WbpLossGrads wbp_bayesian_loss_grads(const code::TannerGraph& g, const WbpPosterior& post,
                                     const std::vector<std::vector<double>>& uniforms,
                                     std::span<const WbpFrame> frames, double beta) {
  const std::size_t iters = post.nominal.iterations;
  const std::size_t edges = g.edge_count();

  std::vector<std::vector<double>> z(iters, std::vector<double>(edges));
  std::vector<std::vector<double>> w_eff(iters, std::vector<double>(edges));
  for (std::size_t q = 0; q < iters; ++q) {
    for (std::size_t e = 0; e < edges; ++e) {
      z[q][e] = nn::concrete_mask(post.logits[q][e], uniforms[q][e], post.temperature);
      w_eff[q][e] = post.nominal.weights[q][e] * (1.0 - z[q][e]);
    }
  }

  WbpLossGrads out;
  auto d_eff = multiloss_core(g, w_eff, frames, out.loss);
  out.dweights.assign(iters, std::vector<double>(edges, 0.0));
  out.dlogits.assign(iters, std::vector<double>(edges, 0.0));
  for (std::size_t q = 0; q < iters; ++q) {
    for (std::size_t e = 0; e < edges; ++e) {
      out.dweights[q][e] = d_eff[q][e] * (1.0 - z[q][e]);
      out.dlogits[q][e] = -d_eff[q][e] * post.nominal.weights[q][e] * z[q][e] * (1.0 - z[q][e]) /
                          post.temperature;
    }
    out.kl += kl_row(post.nominal.weights[q], post.logits[q], beta, post.prior_stddev,
                     out.dweights[q], out.dlogits[q]);
  }
  return out;
}

WbpLossGrads wbp_module_loss_grads(const code::TannerGraph& g, std::span<const double> weights,
                                   std::span<const double> logits,
                                   std::span<const double> uniforms, double temperature,
                                   double prior_stddev,
                                   std::span<const std::vector<double>> teacher_mcv,
                                   std::span<const WbpFrame> frames, double beta) {
  if (frames.empty()) throw InvalidInput("no decoder training frames");
  const std::size_t edges = g.edge_count();
  const std::size_t vars = g.var_count;
  const double scale = 1.0 / (static_cast<double>(frames.size()) * static_cast<double>(vars));

  std::vector<double> z(edges), w_eff(edges);
  for (std::size_t e = 0; e < edges; ++e) {
    z[e] = nn::concrete_mask(logits[e], uniforms[e], temperature);
    w_eff[e] = weights[e] * (1.0 - z[e]);
  }

  WbpLossGrads out;
  out.dweights.assign(1, std::vector<double>(edges, 0.0));
  out.dlogits.assign(1, std::vector<double>(edges, 0.0));
  std::vector<double> d_eff(edges, 0.0);

  std::vector<double> m_vc(edges), m_cv(edges), prod(edges), soft(vars);
  std::vector<double> d_mcv(edges), d_mvc(edges), d_a(edges);
  std::vector<double> ppre, tpre, psuf, tsuf;

  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& frame = frames[f];
    const auto& prev = teacher_mcv[f];
    detail::var_to_check(frame.llr, w_eff, prev, g, m_vc);
    detail::check_to_var(m_vc, g, prod, m_cv);
    detail::marginalize(frame.llr, w_eff, m_cv, g, soft);

    d_mcv.assign(edges, 0.0);
    for (std::size_t v = 0; v < vars; ++v) {
      const double o = soft[v];
      const double d_out = ce_and_grad(o, frame.bits[v], scale, out.loss);
      if (clamped(o)) continue;
      const double d_b = d_out * 0.5 * (1.0 - o * o);
      for (std::size_t e : g.var_edges[v]) {
        d_eff[e] += d_b * m_cv[e];
        d_mcv[e] += d_b * w_eff[e];
      }
    }

    d_mvc.assign(edges, 0.0);
    for (std::size_t h = 0; h < g.check_count; ++h) {
      const auto& ce = g.check_edges[h];
      const std::size_t d = ce.size();
      ppre.resize(d + 1);
      tpre.resize(d + 1);
      psuf.resize(d + 1);
      tsuf.resize(d + 1);
      ppre[0] = 1.0;
      tpre[0] = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double p = prod[ce[i]];
        const double gdp = clamped(p) ? 0.0 : d_mcv[ce[i]] * 2.0 / (1.0 - p * p);
        const double m = m_vc[ce[i]];
        ppre[i + 1] = ppre[i] * m;
        tpre[i + 1] = tpre[i] * m + ppre[i] * gdp;
      }
      psuf[d] = 1.0;
      tsuf[d] = 0.0;
      for (std::size_t i = d; i-- > 0;) {
        const double p = prod[ce[i]];
        const double gdp = clamped(p) ? 0.0 : d_mcv[ce[i]] * 2.0 / (1.0 - p * p);
        const double m = m_vc[ce[i]];
        psuf[i] = psuf[i + 1] * m;
        tsuf[i] = tsuf[i + 1] * m + psuf[i + 1] * gdp;
      }
      for (std::size_t i = 0; i < d; ++i) {
        d_mvc[ce[i]] = tpre[i] * psuf[i + 1] + ppre[i] * tsuf[i + 1];
      }
    }

    for (std::size_t v = 0; v < vars; ++v) {
      double s_da = 0.0;
      for (std::size_t e : g.var_edges[v]) {
        const double t = m_vc[e];
        d_a[e] = clamped(t) ? 0.0 : d_mvc[e] * 0.5 * (1.0 - t * t);
        s_da += d_a[e];
      }
      for (std::size_t e : g.var_edges[v]) {
        d_eff[e] += (s_da - d_a[e]) * prev[e];
      }
    }
  }

  for (std::size_t e = 0; e < edges; ++e) {
    out.dweights[0][e] = d_eff[e] * (1.0 - z[e]);
    out.dlogits[0][e] = -d_eff[e] * weights[e] * z[e] * (1.0 - z[e]) / temperature;
  }
  out.kl = kl_row(weights, logits, beta, prior_stddev, out.dweights[0], out.dlogits[0]);
  return out;
}

WbpParams train_wbp(const code::TannerGraph& g, std::size_t iterations,
                    std::span<const WbpFrame> frames, const WbpTrainOptions& opts) {
  WbpParams params = unit_weights(g, iterations);
  std::vector<std::size_t> sizes(iterations, g.edge_count());
  auto adam = nn::AdamState::init(opts.lr, sizes);
  for (std::size_t step = 0; step < opts.adam_steps; ++step) {
    auto lg = wbp_multiloss_grads(g, params, frames);
    check_divergence(lg.loss);
    if (opts.loss_trace) opts.loss_trace->push_back(lg.loss);
    std::vector<double*> chunks;
    std::vector<const double*> grads;
    for (std::size_t q = 0; q < iterations; ++q) {
      chunks.push_back(params.weights[q].data());
      grads.push_back(lg.dweights[q].data());
    }
    nn::adam_step(adam, chunks, grads);
  }
  return params;
}

WbpPosterior train_wbp_bayesian(const code::TannerGraph& g, std::size_t iterations,
                                std::span<const WbpFrame> frames, const WbpTrainOptions& opts) {
  WbpPosterior post = make_wbp_posterior(unit_weights(g, iterations), opts.init_drop_prob);
  post.temperature = opts.temperature;
  post.prior_stddev = opts.prior_stddev;

  std::vector<std::size_t> sizes(2 * iterations, g.edge_count());
  auto adam = nn::AdamState::init(opts.lr, sizes);
  for (std::size_t step = 0; step < opts.adam_steps; ++step) {
    const auto uniforms = draw_uniforms(iterations, g.edge_count(), opts.seed, step);
    auto lg = wbp_bayesian_loss_grads(g, post, uniforms, frames, opts.beta);
    check_divergence(lg.loss + lg.kl);
    if (opts.loss_trace) opts.loss_trace->push_back(lg.loss + lg.kl);
    std::vector<double*> chunks;
    std::vector<const double*> grads;
    for (std::size_t q = 0; q < iterations; ++q) {
      chunks.push_back(post.nominal.weights[q].data());
      grads.push_back(lg.dweights[q].data());
    }
    for (std::size_t q = 0; q < iterations; ++q) {
      chunks.push_back(post.logits[q].data());
      grads.push_back(lg.dlogits[q].data());
    }
    nn::adam_step(adam, chunks, grads);
  }
  return post;
}

WbpPosterior train_wbp_modular_bayesian(const code::TannerGraph& g, std::size_t iterations,
                                        std::span<const WbpFrame> frames,
                                        const WbpTrainOptions& opts) {
  const std::size_t edges = g.edge_count();
  WbpPosterior post;
  post.nominal.iterations = 0;
  post.temperature = opts.temperature;
  post.prior_stddev = opts.prior_stddev;

  // Teacher check messages per frame, updated as iterations are trained.
  std::vector<std::vector<double>> teacher(frames.size(), std::vector<double>(edges, 0.0));

  const double init_logit = std::log(opts.init_drop_prob / (1.0 - opts.init_drop_prob));
  for (std::size_t q = 0; q < iterations; ++q) {
    std::vector<double> w(edges, 1.0);
    std::vector<double> logits(edges, init_logit);
    std::vector<std::size_t> sizes{edges, edges};
    auto adam = nn::AdamState::init(opts.lr, sizes);
    for (std::size_t step = 0; step < opts.adam_steps; ++step) {
      const auto uniforms = draw_uniforms(1, edges, opts.seed, step, q);
      auto lg = wbp_module_loss_grads(g, w, logits, uniforms[0], opts.temperature,
                                      opts.prior_stddev, teacher, frames, opts.beta);
      check_divergence(lg.loss + lg.kl);
      if (opts.loss_trace) opts.loss_trace->push_back(lg.loss + lg.kl);
      double* chunks[2] = {w.data(), logits.data()};
      const double* grads[2] = {lg.dweights[0].data(), lg.dlogits[0].data()};
      nn::adam_step(adam, chunks, grads);
    }
    post.nominal.weights.push_back(std::move(w));
    post.logits.push_back(std::move(logits));
    post.nominal.iterations = q + 1;

    // Advance the teacher state with the ensembled trained iteration.
    std::vector<double> m_vc(edges), avg(edges), prod(edges);
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const std::uint64_t base = derive_seed(opts.seed, "wbp_teacher", {f});
      avg.assign(edges, 0.0);
      for (std::size_t j = 0; j < opts.ensemble; ++j) {
        const auto wj = detail::realize_weights(post, q, derive_seed(base, "wbp_member", {q, j}));
        detail::var_to_check(frames[f].llr, wj, teacher[f], g, m_vc);
        for (std::size_t e = 0; e < edges; ++e) avg[e] += m_vc[e];
      }
      for (std::size_t e = 0; e < edges; ++e) avg[e] /= static_cast<double>(opts.ensemble);
      detail::check_to_var(avg, g, prod, teacher[f]);
    }
  }
  return post;
}

}  // namespace bayesrx::wbp
