#pragma once

#include <string>
#include <vector>

#include "sim/runner.hpp"

namespace bayesrx::sim {

// Axes and series selection for emit_plots. Parsed from a flat key=value
// file: x (snr_db or block), y (comma list of ser/ber/ece), out_prefix.
struct PlotSpec {
  std::string x = "snr_db";
  std::vector<std::string> y = {"ser"};
  std::string out_prefix = "plot";
};

PlotSpec parse_plot_spec_text(const std::string& text);
PlotSpec load_plot_spec(const std::string& path);

// One SVG per y metric: records grouped by detector/decoder mode, block
// means per x value, log-scale y for ser and ber. Returns written paths;
// empty input produces no files.
std::vector<std::string> emit_plots(const std::vector<MetricRecord>& records,
                                    const PlotSpec& spec, const std::string& out_dir);

}  // namespace bayesrx::sim
