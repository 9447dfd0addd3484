#include <glob.h>

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bayesrx.h"

namespace {

// Process exit codes; invalid input counts as a config problem.
int exit_code(brx_status st) {
  switch (st) {
    case BRX_OK:
      return 0;
    case BRX_ERR_TRAINING:
      return 3;
    case BRX_ERR_IO:
      return 4;
    default:
      return 2;
  }
}

int report(brx_status st) {
  if (st != BRX_OK) std::fprintf(stderr, "error: %s\n", brx_last_error());
  return exit_code(st);
}

struct ConfigHandle {
  brx_config* cfg = nullptr;
  ~ConfigHandle() { brx_config_free(cfg); }
};

// Loads the config and applies the --seed / --out-dir overrides.
brx_status open_config(const std::string& path, const std::string& seed,
                       const std::string& out_dir, ConfigHandle& handle) {
  brx_status st = brx_config_load(path.c_str(), &handle.cfg);
  if (st != BRX_OK) return st;
  if (!seed.empty()) {
    st = brx_config_set(handle.cfg, "seed", seed.c_str());
    if (st != BRX_OK) return st;
  }
  if (!out_dir.empty()) {
    st = brx_config_set(handle.cfg, "out_dir", out_dir.c_str());
    if (st != BRX_OK) return st;
  }
  return BRX_OK;
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> paths;
  for (const auto& pattern : patterns) {
    glob_t g{};
    const int rc = glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
  }
  return paths;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"link-level MIMO detection and decoding testbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", brx_version());

  std::string config_path;
  std::string csv_path;
  std::string spec_path;
  std::vector<std::string> sweep_patterns;
  std::string seed_override;
  std::string out_dir_override;
  size_t threads = 1;

  auto add_overrides = [&](CLI::App* cmd, bool with_threads) {
    cmd->add_option("--seed", seed_override, "override the config seed");
    cmd->add_option("--out-dir", out_dir_override, "override the output directory");
    if (with_threads) cmd->add_option("--threads", threads, "worker threads (default 1)");
  };

  auto* run = app.add_subcommand("run", "train the detector per block and record metrics");
  run->add_option("config", config_path, "experiment config file")->required();
  add_overrides(run, true);

  auto* oracle = app.add_subcommand("oracle", "record exact-posterior reference metrics");
  oracle->add_option("config", config_path, "experiment config file")->required();
  add_overrides(oracle, true);

  auto* train = app.add_subcommand("train-decoder", "train the decoder offline and save it");
  train->add_option("config", config_path, "experiment config file")->required();
  add_overrides(train, false);

  auto* sweep = app.add_subcommand("sweep", "run several configs into one CSV");
  sweep->add_option("configs", sweep_patterns, "config files or globs")->required();
  sweep->add_option("--out-dir", out_dir_override, "directory for the aggregate CSV");
  sweep->add_option("--threads", threads, "worker threads (default 1)");

  auto* plot = app.add_subcommand("plot", "render SVG curves from a metrics CSV");
  plot->add_option("csv", csv_path, "metrics CSV file")->required();
  plot->add_option("plotspec", spec_path, "plot spec file")->required();
  plot->add_option("--out-dir", out_dir_override, "directory for the SVG files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  char out_buf[4096];

  if (run->parsed()) {
    ConfigHandle handle;
    brx_status st = open_config(config_path, seed_override, out_dir_override, handle);
    if (st == BRX_OK) st = brx_run(handle.cfg, threads, out_buf, sizeof(out_buf));
    if (st == BRX_OK) std::printf("%s\n", out_buf);
    return report(st);
  }

  if (oracle->parsed()) {
    ConfigHandle handle;
    brx_status st = open_config(config_path, seed_override, out_dir_override, handle);
    if (st == BRX_OK) st = brx_run_oracle(handle.cfg, threads, out_buf, sizeof(out_buf));
    if (st == BRX_OK) std::printf("%s\n", out_buf);
    return report(st);
  }

  if (train->parsed()) {
    ConfigHandle handle;
    brx_status st = open_config(config_path, seed_override, out_dir_override, handle);
    if (st == BRX_OK) st = brx_train_decoder(handle.cfg, out_buf, sizeof(out_buf));
    if (st == BRX_OK) std::printf("%s\n", out_buf);
    return report(st);
  }

  if (sweep->parsed()) {
    const std::vector<std::string> paths = expand_globs(sweep_patterns);
    if (paths.empty()) {
      std::fprintf(stderr, "error: no config files match\n");
      return 2;
    }
    std::vector<const char*> c_paths;
    c_paths.reserve(paths.size());
    for (const auto& p : paths) c_paths.push_back(p.c_str());
    const std::string out_dir = out_dir_override.empty() ? "." : out_dir_override;
    const std::string out_csv = out_dir + "/sweep_results.csv";
    const brx_status st = brx_sweep(c_paths.data(), c_paths.size(), threads, out_csv.c_str());
    if (st == BRX_OK) std::printf("%s\n", out_csv.c_str());
    return report(st);
  }

  if (plot->parsed()) {
    const std::string out_dir = out_dir_override.empty() ? "." : out_dir_override;
    const brx_status st = brx_plot(csv_path.c_str(), spec_path.c_str(), out_dir.c_str());
    return report(st);
  }

  return 2;
}
