#include "sim/runner.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "code/tanner.hpp"
#include "common/errors.hpp"
#include "common/seeds.hpp"
#include "deepsic/deepsic.hpp"
#include "deepsic/deepsic_train.hpp"
#include "metrics/metrics.hpp"
#include "sim/fmt.hpp"
#include "sim/oracle.hpp"
#include "wbp/wbp.hpp"
#include "wbp/wbp_train.hpp"

namespace bayesrx::sim {

namespace {

code::CodeSpec build_code(CodeChoice choice) {
  if (choice == CodeChoice::hamming74) return code::hamming_7_4();
  return code::build_polar_code(128, 64);
}

modem::ChannelKind block_kind(ChannelModel model) {
  return model == ChannelModel::tanh_sat ? modem::ChannelKind::tanh_sat
                                         : modem::ChannelKind::linear;
}

// Everything immutable shared by the per-block tasks.
struct RunContext {
  const ExperimentConfig* cfg = nullptr;
  const modem::Constellation* con = nullptr;
  std::vector<modem::ChannelMatrix> trace;
  modem::ChannelMatrix synth_h;
  std::string fingerprint;

  bool coded = false;
  code::CodeSpec code;
  code::TannerGraph graph;
  wbp::WbpParams decoder_params;      // plainBP / frequentist
  wbp::WbpPosterior decoder_posterior;  // B / MB

  const modem::ChannelMatrix& channel_for_block(std::size_t block) const {
    if (cfg->channel == ChannelModel::trace) return trace[block % trace.size()];
    return synth_h;
  }
};

RunContext make_context(const ExperimentConfig& cfg, bool need_decoder) {
  cfg.validate();
  RunContext ctx;
  ctx.cfg = &cfg;
  ctx.con = &modem::constellation(cfg.constellation);
  ctx.fingerprint = cfg.fingerprint();
  if (cfg.channel == ChannelModel::trace) {
    ctx.trace = modem::load_channel_trace(cfg.trace_path);
    for (const auto& h : ctx.trace) {
      if (h.users != cfg.users || h.antennas != cfg.antennas) {
        throw ConfigError("trace matrices do not match users/antennas");
      }
    }
  } else {
    ctx.synth_h = modem::exp_decay_matrix(cfg.antennas, cfg.users);
  }
  ctx.coded = cfg.decoder_mode != DecoderMode::none;
  if (ctx.coded) {
    ctx.code = build_code(cfg.code);
    ctx.graph = code::tanner_graph(ctx.code.parity_check);
    switch (cfg.decoder_mode) {
      case DecoderMode::plain_bp:
        ctx.decoder_params = wbp::unit_weights(ctx.graph, cfg.decoder_iterations);
        break;
      case DecoderMode::frequentist:
        if (need_decoder) {
          ctx.decoder_params =
              wbp::load_wbp(cfg.decoder_file(), cfg.decoder_iterations, ctx.graph.edge_count());
        }
        break;
      case DecoderMode::bayesian:
      case DecoderMode::modular_bayesian:
        if (need_decoder) {
          ctx.decoder_posterior = wbp::load_wbp_posterior(
              cfg.decoder_file(), cfg.decoder_iterations, ctx.graph.edge_count());
        }
        break;
      case DecoderMode::none:
        break;
    }
  }
  return ctx;
}

modem::TransmissionBlock generate_block(const RunContext& ctx, double snr_db,
                                        std::uint64_t block_seed, std::size_t block) {
  const ExperimentConfig& cfg = *ctx.cfg;
  modem::BlockConfig bc;
  bc.users = cfg.users;
  bc.antennas = cfg.antennas;
  bc.constellation = ctx.con;
  bc.kind = block_kind(cfg.channel);
  bc.pilot_count = cfg.pilots;
  bc.info_count = cfg.info;
  bc.snr_db = snr_db;
  bc.code = ctx.coded ? &ctx.code : nullptr;
  std::mt19937_64 rng(derive_seed(block_seed, "gen"));
  return modem::make_block(bc, ctx.channel_for_block(block), rng);
}

deepsic::DeepSicTrainOptions detector_options(const ExperimentConfig& cfg,
                                              std::uint64_t train_seed) {
  deepsic::DeepSicTrainOptions opts;
  opts.adam_steps = cfg.detector_adam_steps;
  opts.lr = cfg.detector_lr;
  opts.beta = cfg.beta;
  opts.ensemble = cfg.detector_ensemble;
  opts.init_drop_prob = cfg.drop_prob_init;
  opts.temperature = cfg.temperature;
  opts.prior_stddev = cfg.prior_stddev;
  opts.seed = train_seed;
  return opts;
}

// Trains on the pilots and returns soft estimates for the info segment.
modem::SoftSymbols detect_info(const ExperimentConfig& cfg, const modem::TransmissionBlock& blk,
                               std::uint64_t block_seed) {
  const auto opts = detector_options(cfg, derive_seed(block_seed, "det_train"));
  const std::span<const modem::Cx> info{blk.outputs.data() + blk.pilot_count * blk.antennas,
                                        blk.info_count * blk.antennas};
  const std::uint64_t infer_seed = derive_seed(block_seed, "det_infer");
  switch (cfg.detector_mode) {
    case DetectorMode::frequentist: {
      const auto params = deepsic::train_deepsic_frequentist(blk, cfg.detector_iterations, opts);
      return deepsic::deepsic_infer(params, info, blk.info_count);
    }
    case DetectorMode::bayesian: {
      const auto post = deepsic::train_deepsic_bayesian_e2e(blk, cfg.detector_iterations, opts);
      return deepsic::bayesian_infer(post, info, blk.info_count, cfg.detector_ensemble,
                                     infer_seed);
    }
    case DetectorMode::modular_bayesian: {
      const auto post =
          deepsic::train_deepsic_modular_bayesian(blk, cfg.detector_iterations, opts);
      return deepsic::modular_bayesian_infer(post, info, blk.info_count, cfg.detector_ensemble,
                                             infer_seed);
    }
    case DetectorMode::blackbox: {
      const auto net = deepsic::train_blackbox(blk, opts);
      return deepsic::blackbox_detect(net, info, blk.info_count, blk.users);
    }
  }
  throw InvalidInput("unhandled detector mode");
}

double info_ser(const modem::TransmissionBlock& blk, const modem::SoftSymbols& soft) {
  const auto est = deepsic::hard_decisions(soft);
  const std::span<const std::size_t> truth{blk.symbols.data() + blk.pilot_count * blk.users,
                                           blk.info_count * blk.users};
  return metrics::ser(est, truth);
}

double info_ece(const modem::TransmissionBlock& blk, const modem::SoftSymbols& soft,
                std::size_t bins) {
  const auto est = deepsic::hard_decisions(soft);
  std::vector<metrics::PredictionRecord> records(est.size());
  for (std::size_t i = 0; i < soft.times; ++i) {
    for (std::size_t k = 0; k < soft.users; ++k) {
      const std::size_t idx = i * soft.users + k;
      records[idx].confidence = soft.at(i, k)[est[idx]];
      records[idx].correct =
          est[idx] == blk.symbols[(blk.pilot_count + i) * blk.users + k];
    }
  }
  return metrics::ece(records, bins);
}

// Per-codeword LLRs from the detector's soft symbols, padding stripped.
std::vector<double> codeword_llrs(const modem::SoftSymbols& soft, const modem::Constellation& con,
                                  std::size_t user, std::size_t cw_index,
                                  std::size_t block_length) {
  const std::size_t r = con.bits_per_symbol;
  const std::size_t per_cw = modem::symbols_per_codeword(block_length, r);
  std::vector<double> llr(block_length);
  std::vector<double> probs(con.size());
  for (std::size_t si = 0; si < per_cw; ++si) {
    const std::size_t time = cw_index * per_cw + si;
    const double* p = soft.at(time, user);
    const auto cbits =
        modem::soft_bit_marginals(std::span<const double>(p, con.size()), con);
    for (std::size_t b = 0; b < r; ++b) {
      const std::size_t pos = si * r + b;
      if (pos < block_length) llr[pos] = modem::llr_from_soft_bit(cbits[b]);
    }
  }
  return llr;
}

double decode_ber(const RunContext& ctx, const modem::TransmissionBlock& blk,
                  const modem::SoftSymbols& soft, std::uint64_t block_seed) {
  const ExperimentConfig& cfg = *ctx.cfg;
  std::size_t errors = 0;
  std::size_t total = 0;
  for (std::size_t k = 0; k < blk.users; ++k) {
    for (std::size_t c = 0; c < blk.codewords_per_user; ++c) {
      const auto llr = codeword_llrs(soft, *ctx.con, k, c, ctx.code.block_length);
      std::vector<double> out;
      switch (cfg.decoder_mode) {
        case DecoderMode::plain_bp:
        case DecoderMode::frequentist:
          out = wbp::wbp_infer(ctx.decoder_params, llr, ctx.graph);
          break;
        case DecoderMode::bayesian:
          out = wbp::bayesian_wbp_infer(ctx.decoder_posterior, llr, ctx.graph,
                                        cfg.decoder_ensemble,
                                        derive_seed(block_seed, "dec_infer", {k, c}));
          break;
        case DecoderMode::modular_bayesian:
          out = wbp::modular_bayesian_wbp_infer(ctx.decoder_posterior, llr, ctx.graph,
                                                cfg.decoder_ensemble,
                                                derive_seed(block_seed, "dec_infer", {k, c}));
          break;
        case DecoderMode::none:
          throw InvalidInput("decode called without a decoder");
      }
      const auto bits = wbp::hard_decide(out);
      const auto rec = code::message_bit_recovery(ctx.code, bits);
      const std::size_t m = ctx.code.message_length;
      for (std::size_t b = 0; b < m; ++b) {
        errors += rec.message[b] != blk.message_bits[k][c * m + b] ? 1 : 0;
        ++total;
      }
    }
  }
  return static_cast<double>(errors) / static_cast<double>(total);
}

MetricRecord run_block(const RunContext& ctx, std::size_t snr_index, std::size_t block) {
  const ExperimentConfig& cfg = *ctx.cfg;
  const auto start = std::chrono::steady_clock::now();
  const double snr = cfg.snr_db[snr_index];
  const std::uint64_t block_seed = derive_seed(cfg.seed, "block", {snr_index, block});

  const auto blk = generate_block(ctx, snr, block_seed, block);
  const auto soft = detect_info(cfg, blk, block_seed);

  MetricRecord rec;
  rec.fingerprint = ctx.fingerprint;
  rec.block = block;
  rec.snr_db = snr;
  rec.detector_mode = to_string(cfg.detector_mode);
  rec.decoder_mode = to_string(cfg.decoder_mode);
  rec.ser = info_ser(blk, soft);
  rec.ece = info_ece(blk, soft, cfg.ece_bins);
  if (ctx.coded) {
    rec.has_ber = true;
    rec.ber = decode_ber(ctx, blk, soft, block_seed);
  }
  if (cfg.record_runtime) {
    rec.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  }
  return rec;
}

MetricRecord run_oracle_block(const RunContext& ctx, std::size_t snr_index, std::size_t block) {
  const ExperimentConfig& cfg = *ctx.cfg;
  const auto start = std::chrono::steady_clock::now();
  const double snr = cfg.snr_db[snr_index];
  const std::uint64_t block_seed = derive_seed(cfg.seed, "block", {snr_index, block});

  const auto blk = generate_block(ctx, snr, block_seed, block);
  const std::span<const modem::Cx> info{blk.outputs.data() + blk.pilot_count * blk.antennas,
                                        blk.info_count * blk.antennas};
  const auto soft = map_oracle_soft(blk.channel, info, blk.info_count, blk.noise_stddev,
                                    *ctx.con, block_kind(cfg.channel));

  MetricRecord rec;
  rec.fingerprint = ctx.fingerprint;
  rec.block = block;
  rec.snr_db = snr;
  rec.detector_mode = "map_oracle";
  rec.decoder_mode = "none";
  rec.ser = info_ser(blk, soft);
  rec.ece = info_ece(blk, soft, cfg.ece_bins);
  if (ctx.coded && ctx.code.message_length <= 16) {
    rec.decoder_mode = "ml_oracle";
    rec.has_ber = true;
    std::size_t errors = 0, total = 0;
    for (std::size_t k = 0; k < blk.users; ++k) {
      for (std::size_t c = 0; c < blk.codewords_per_user; ++c) {
        const auto llr = codeword_llrs(soft, *ctx.con, k, c, ctx.code.block_length);
        const auto bits = ml_oracle_decode(ctx.code, llr);
        const auto res = code::message_bit_recovery(ctx.code, bits);
        const std::size_t m = ctx.code.message_length;
        for (std::size_t b = 0; b < m; ++b) {
          errors += res.message[b] != blk.message_bits[k][c * m + b] ? 1 : 0;
          ++total;
        }
      }
    }
    rec.ber = static_cast<double>(errors) / static_cast<double>(total);
  }
  if (cfg.record_runtime) {
    rec.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  }
  return rec;
}

template <typename Task>
std::vector<MetricRecord> run_grid(const ExperimentConfig& cfg, std::size_t threads, Task task) {
  const std::size_t total = cfg.snr_db.size() * cfg.blocks;
  std::vector<MetricRecord> records(total);
  if (threads <= 1 || total <= 1) {
    for (std::size_t t = 0; t < total; ++t) records[t] = task(t / cfg.blocks, t % cfg.blocks);
    return records;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  const std::size_t workers = std::min(threads, total);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t t = next.fetch_add(1);
        if (t >= total) return;
        {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (first_error) return;
        }
        try {
          records[t] = task(t / cfg.blocks, t % cfg.blocks);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return records;
}

}  // namespace

std::vector<MetricRecord> run_experiment(const ExperimentConfig& cfg, std::size_t threads) {
  const auto ctx = make_context(cfg, true);
  return run_grid(cfg, threads,
                  [&](std::size_t s, std::size_t b) { return run_block(ctx, s, b); });
}

std::vector<MetricRecord> run_oracle(const ExperimentConfig& cfg, std::size_t threads) {
  const auto ctx = make_context(cfg, false);
  return run_grid(cfg, threads,
                  [&](std::size_t s, std::size_t b) { return run_oracle_block(ctx, s, b); });
}

void train_decoder_offline(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.decoder_mode == DecoderMode::none || cfg.decoder_mode == DecoderMode::plain_bp) {
    throw ConfigError("decoder_mode " + to_string(cfg.decoder_mode) +
                      " takes no offline training");
  }
  if (cfg.decoder_train_frames == 0) {
    throw ConfigError("key 'decoder_train_frames': must be positive");
  }
  const auto& con = modem::constellation(cfg.constellation);
  const auto code = build_code(cfg.code);
  const auto graph = code::tanner_graph(code.parity_check);

  // Dedicated transmission at the training SNR, sized to cover the frames.
  const std::size_t per_cw = modem::symbols_per_codeword(code.block_length, con.bits_per_symbol);
  const std::size_t cw_per_user = (cfg.decoder_train_frames + cfg.users - 1) / cfg.users;
  ExperimentConfig train_cfg = cfg;
  train_cfg.info = cw_per_user * per_cw;
  train_cfg.snr_db = {cfg.effective_decoder_train_snr()};

  const auto ctx_cfg = train_cfg;  // keeps validate() happy on the adjusted copy
  RunContext ctx;
  ctx.cfg = &ctx_cfg;
  ctx.con = &con;
  ctx.fingerprint = ctx_cfg.fingerprint();
  if (cfg.channel == ChannelModel::trace) {
    ctx.trace = modem::load_channel_trace(cfg.trace_path);
  } else {
    ctx.synth_h = modem::exp_decay_matrix(cfg.antennas, cfg.users);
  }
  ctx.coded = true;
  ctx.code = code;
  ctx.graph = graph;

  const std::uint64_t train_seed = derive_seed(cfg.seed, "decoder_train");
  const auto blk = generate_block(ctx, ctx_cfg.snr_db[0], train_seed, 0);
  const auto soft = detect_info(ctx_cfg, blk, train_seed);

  std::vector<wbp::WbpFrame> frames;
  frames.reserve(cfg.decoder_train_frames);
  for (std::size_t k = 0; k < blk.users && frames.size() < cfg.decoder_train_frames; ++k) {
    for (std::size_t c = 0; c < blk.codewords_per_user && frames.size() < cfg.decoder_train_frames;
         ++c) {
      wbp::WbpFrame frame;
      frame.llr = codeword_llrs(soft, con, k, c, code.block_length);
      frame.bits.assign(blk.codeword_bits[k].begin() + c * code.block_length,
                        blk.codeword_bits[k].begin() + (c + 1) * code.block_length);
      frames.push_back(std::move(frame));
    }
  }

  wbp::WbpTrainOptions opts;
  opts.adam_steps = cfg.decoder_adam_steps;
  opts.lr = cfg.decoder_lr;
  opts.beta = cfg.beta;
  opts.ensemble = cfg.decoder_ensemble;
  opts.init_drop_prob = cfg.drop_prob_init;
  opts.temperature = cfg.temperature;
  opts.prior_stddev = cfg.prior_stddev;
  opts.seed = derive_seed(train_seed, "wbp_train");

  std::filesystem::create_directories(std::filesystem::path(cfg.decoder_file()).parent_path());
  if (cfg.decoder_mode == DecoderMode::frequentist) {
    const auto params = wbp::train_wbp(graph, cfg.decoder_iterations, frames, opts);
    wbp::save_wbp(params, cfg.decoder_file());
  } else if (cfg.decoder_mode == DecoderMode::bayesian) {
    const auto post = wbp::train_wbp_bayesian(graph, cfg.decoder_iterations, frames, opts);
    wbp::save_wbp_posterior(post, cfg.decoder_file());
  } else {
    const auto post = wbp::train_wbp_modular_bayesian(graph, cfg.decoder_iterations, frames, opts);
    wbp::save_wbp_posterior(post, cfg.decoder_file());
  }
}

void write_metrics_csv(const std::string& path, std::span<const MetricRecord> records) {
  const auto dir = std::filesystem::path(path).parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << "fingerprint,block,snr_db,detector_mode,decoder_mode,ser,ber,ece,runtime_ms\n";
  for (const auto& r : records) {
    f << r.fingerprint << ',' << r.block << ',' << format_double(r.snr_db) << ','
      << r.detector_mode << ',' << r.decoder_mode << ',' << format_double(r.ser) << ','
      << (r.has_ber ? format_double(r.ber) : std::string{}) << ',' << format_double(r.ece) << ','
      << r.runtime_ms << '\n';
  }
  if (!f) throw IoError("short write to " + path);
}

std::vector<MetricRecord> read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw IoError(path + ": empty CSV");
  if (line != "fingerprint,block,snr_db,detector_mode,decoder_mode,ser,ber,ece,runtime_ms") {
    throw IoError(path + ": unexpected CSV header");
  }
  std::vector<MetricRecord> records;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (cells.size() != 9) {
      throw IoError(path + " line " + std::to_string(lineno) + ": expected 9 columns");
    }
    const std::string ctxt = path + " line " + std::to_string(lineno);
    MetricRecord r;
    r.fingerprint = cells[0];
    r.block = static_cast<std::size_t>(parse_double(cells[1], ctxt));
    r.snr_db = parse_double(cells[2], ctxt);
    r.detector_mode = cells[3];
    r.decoder_mode = cells[4];
    r.ser = parse_double(cells[5], ctxt);
    r.has_ber = !cells[6].empty();
    if (r.has_ber) r.ber = parse_double(cells[6], ctxt);
    r.ece = parse_double(cells[7], ctxt);
    r.runtime_ms = static_cast<std::int64_t>(parse_double(cells[8], ctxt));
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<MetricRecord> run_sweep(std::span<const std::string> config_paths,
                                    std::size_t threads, const std::string& out_csv) {
  if (config_paths.empty()) throw ConfigError("sweep matched no config files");
  std::vector<MetricRecord> all;
  for (const auto& path : config_paths) {
    const auto cfg = load_config(path);
    auto records = run_experiment(cfg, threads);
    all.insert(all.end(), records.begin(), records.end());
  }
  write_metrics_csv(out_csv, all);
  return all;
}

}  // namespace bayesrx::sim
