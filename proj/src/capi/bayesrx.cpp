#include "bayesrx.h"

#include <cstring>
#include <exception>
#include <span>
#include <string>
#include <vector>

#include "common/errors.hpp"
#include "sim/config.hpp"
#include "sim/plot.hpp"
#include "sim/runner.hpp"

namespace {

thread_local std::string g_last_error;

brx_status status_of(const bayesrx::Error& e) {
  switch (e.code()) {
    case bayesrx::ErrorCode::invalid_input:
      return BRX_ERR_INVALID;
    case bayesrx::ErrorCode::config:
      return BRX_ERR_CONFIG;
    case bayesrx::ErrorCode::training:
      return BRX_ERR_TRAINING;
    case bayesrx::ErrorCode::io:
      return BRX_ERR_IO;
  }
  return BRX_ERR_INVALID;
}

brx_status fail(brx_status code, std::string msg) {
  g_last_error = std::move(msg);
  return code;
}

template <typename Fn>
brx_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BRX_OK;
  } catch (const bayesrx::Error& e) {
    return fail(status_of(e), e.what());
  } catch (const std::exception& e) {
    return fail(BRX_ERR_INVALID, e.what());
  }
}

// Copies into a caller buffer after fn() already succeeded; too-small
// buffers report failure without undoing the work.
brx_status copy_out(const std::string& s, char* buf, size_t bufsize) {
  if (buf == nullptr) return BRX_OK;
  if (bufsize < s.size() + 1) return fail(BRX_ERR_INVALID, "output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return BRX_OK;
}

}  // namespace

struct brx_config {
  bayesrx::sim::ExperimentConfig cfg;
};

extern "C" {

brx_status brx_config_load(const char* path, brx_config** out) {
  if (path == nullptr || out == nullptr) return fail(BRX_ERR_INVALID, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new brx_config{bayesrx::sim::load_config(path)}; });
}

brx_status brx_config_parse(const char* text, brx_config** out) {
  if (text == nullptr || out == nullptr) return fail(BRX_ERR_INVALID, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new brx_config{bayesrx::sim::parse_config_text(text)}; });
}

brx_status brx_config_set(brx_config* cfg, const char* key, const char* value) {
  if (cfg == nullptr || key == nullptr || value == nullptr)
    return fail(BRX_ERR_INVALID, "null argument");
  return guarded([&] { bayesrx::sim::apply_config_entry(cfg->cfg, key, value); });
}

void brx_config_free(brx_config* cfg) { delete cfg; }

brx_status brx_config_fingerprint(const brx_config* cfg, char* buf, size_t bufsize) {
  if (cfg == nullptr || buf == nullptr) return fail(BRX_ERR_INVALID, "null argument");
  std::string fp;
  const brx_status st = guarded([&] { fp = cfg->cfg.fingerprint(); });
  if (st != BRX_OK) return st;
  return copy_out(fp, buf, bufsize);
}

brx_status brx_run(const brx_config* cfg, size_t threads, char* csv_path, size_t bufsize) {
  if (cfg == nullptr) return fail(BRX_ERR_INVALID, "null config");
  std::string path;
  const brx_status st = guarded([&] {
    const auto records = bayesrx::sim::run_experiment(cfg->cfg, threads);
    path = cfg->cfg.csv_path();
    bayesrx::sim::write_metrics_csv(path, records);
  });
  if (st != BRX_OK) return st;
  return copy_out(path, csv_path, bufsize);
}

brx_status brx_run_oracle(const brx_config* cfg, size_t threads, char* csv_path, size_t bufsize) {
  if (cfg == nullptr) return fail(BRX_ERR_INVALID, "null config");
  std::string path;
  const brx_status st = guarded([&] {
    const auto records = bayesrx::sim::run_oracle(cfg->cfg, threads);
    path = cfg->cfg.out_dir + "/oracle_" + cfg->cfg.out_csv;
    bayesrx::sim::write_metrics_csv(path, records);
  });
  if (st != BRX_OK) return st;
  return copy_out(path, csv_path, bufsize);
}

brx_status brx_train_decoder(const brx_config* cfg, char* decoder_path, size_t bufsize) {
  if (cfg == nullptr) return fail(BRX_ERR_INVALID, "null config");
  std::string path;
  const brx_status st = guarded([&] {
    bayesrx::sim::train_decoder_offline(cfg->cfg);
    path = cfg->cfg.decoder_file();
  });
  if (st != BRX_OK) return st;
  return copy_out(path, decoder_path, bufsize);
}

brx_status brx_sweep(const char* const* config_paths, size_t count, size_t threads,
                     const char* out_csv) {
  if (config_paths == nullptr || out_csv == nullptr) return fail(BRX_ERR_INVALID, "null argument");
  return guarded([&] {
    std::vector<std::string> paths;
    paths.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      if (config_paths[i] == nullptr) throw bayesrx::InvalidInput("null config path");
      paths.emplace_back(config_paths[i]);
    }
    bayesrx::sim::run_sweep(paths, threads, out_csv);
  });
}

brx_status brx_plot(const char* csv_path, const char* spec_path, const char* out_dir) {
  if (csv_path == nullptr || out_dir == nullptr) return fail(BRX_ERR_INVALID, "null argument");
  return guarded([&] {
    const auto records = bayesrx::sim::read_metrics_csv(csv_path);
    bayesrx::sim::PlotSpec spec;
    if (spec_path != nullptr) spec = bayesrx::sim::load_plot_spec(spec_path);
    bayesrx::sim::emit_plots(records, spec, out_dir);
  });
}

const char* brx_last_error(void) { return g_last_error.c_str(); }

const char* brx_version(void) { return "0.1.0"; }

}  // extern "C"
