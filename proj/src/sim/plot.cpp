#include "sim/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "common/errors.hpp"
#include "sim/fmt.hpp"

namespace bayesrx::sim {

namespace {

const char* kPalette[8] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

bool metric_value(const MetricRecord& r, const std::string& name, double* out) {
  if (name == "ser") {
    *out = r.ser;
    return true;
  }
  if (name == "ber") {
    *out = r.ber;
    return r.has_ber;
  }
  if (name == "ece") {
    *out = r.ece;
    return true;
  }
  throw ConfigError("plot spec: unknown y column '" + name + "'");
}

double x_value(const MetricRecord& r, const std::string& name) {
  if (name == "snr_db") return r.snr_db;
  if (name == "block") return static_cast<double>(r.block);
  throw ConfigError("plot spec: unknown x column '" + name + "'");
}

std::string group_label(const MetricRecord& r) {
  if (r.decoder_mode == "none") return r.detector_mode;
  return r.detector_mode + "/" + r.decoder_mode;
}

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // x, mean metric
};

std::vector<Series> aggregate(const std::vector<MetricRecord>& records, const std::string& x,
                              const std::string& y) {
  std::map<std::string, std::map<double, std::pair<double, std::size_t>>> acc;
  for (const auto& r : records) {
    double v = 0.0;
    if (!metric_value(r, y, &v)) continue;
    auto& cell = acc[group_label(r)][x_value(r, x)];
    cell.first += v;
    cell.second += 1;
  }
  std::vector<Series> out;
  for (const auto& [label, by_x] : acc) {
    Series s;
    s.label = label;
    for (const auto& [xv, cell] : by_x) {
      s.points.emplace_back(xv, cell.first / static_cast<double>(cell.second));
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct Extent {
  double lo = 0.0, hi = 1.0;
};

std::string svg_for(const std::vector<Series>& series, const std::string& x_name,
                    const std::string& y_name, bool log_y) {
  const double width = 640, height = 480;
  const double left = 70, right = width - 170, top = 36, bottom = height - 56;

  Extent xe, ye;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [xv, yv] : s.points) {
      if (log_y && yv <= 0.0) continue;
      const double yt = log_y ? std::log10(yv) : yv;
      if (first) {
        xe = {xv, xv};
        ye = {yt, yt};
        first = false;
      } else {
        xe.lo = std::min(xe.lo, xv);
        xe.hi = std::max(xe.hi, xv);
        ye.lo = std::min(ye.lo, yt);
        ye.hi = std::max(ye.hi, yt);
      }
    }
  }
  if (first) return {};  // nothing plottable
  if (xe.hi == xe.lo) {
    xe.lo -= 1.0;
    xe.hi += 1.0;
  }
  if (ye.hi == ye.lo) {
    ye.lo -= log_y ? 1.0 : 0.5;
    ye.hi += log_y ? 1.0 : 0.5;
  }
  if (!log_y) ye.lo = std::min(ye.lo, 0.0);

  const auto sx = [&](double v) {
    return left + (v - xe.lo) / (xe.hi - xe.lo) * (right - left);
  };
  const auto sy = [&](double v) {
    const double t = log_y ? std::log10(v) : v;
    return bottom - (t - ye.lo) / (ye.hi - ye.lo) * (bottom - top);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << (left + right) / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << y_name << " vs " << x_name
      << "</text>\n";

  // Axes.
  svg << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\""
      << bottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";

  // X ticks: five evenly spaced.
  for (int i = 0; i <= 4; ++i) {
    const double v = xe.lo + (xe.hi - xe.lo) * i / 4.0;
    const double px = sx(v);
    svg << "<line x1=\"" << px << "\" y1=\"" << bottom << "\" x2=\"" << px << "\" y2=\""
        << bottom + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << px << "\" y=\"" << bottom + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << format_double(std::round(v * 100.0) / 100.0) << "</text>\n";
  }
  // Y ticks: decades when logarithmic, five splits otherwise.
  if (log_y) {
    const int d0 = static_cast<int>(std::floor(ye.lo));
    const int d1 = static_cast<int>(std::ceil(ye.hi));
    for (int d = d0; d <= d1; ++d) {
      if (d < ye.lo - 1e-9 || d > ye.hi + 1e-9) continue;
      const double py = bottom - (d - ye.lo) / (ye.hi - ye.lo) * (bottom - top);
      svg << "<line x1=\"" << left - 5 << "\" y1=\"" << py << "\" x2=\"" << left << "\" y2=\""
          << py << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << left - 8 << "\" y=\"" << py + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">1e" << d
          << "</text>\n";
    }
  } else {
    for (int i = 0; i <= 4; ++i) {
      const double v = ye.lo + (ye.hi - ye.lo) * i / 4.0;
      const double py = bottom - (v - ye.lo) / (ye.hi - ye.lo) * (bottom - top);
      svg << "<line x1=\"" << left - 5 << "\" y1=\"" << py << "\" x2=\"" << left << "\" y2=\""
          << py << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << left - 8 << "\" y=\"" << py + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
          << format_double(std::round(v * 10000.0) / 10000.0) << "</text>\n";
    }
  }
  svg << "<text x=\"" << (left + right) / 2 << "\" y=\"" << height - 16
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_name
      << "</text>\n";

  // Series polylines and legend.
  std::size_t color = 0;
  double legend_y = top + 10;
  for (const auto& s : series) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& [xv, yv] : s.points) {
      if (log_y && yv <= 0.0) continue;
      pts.emplace_back(sx(xv), sy(yv));
    }
    const char* stroke = kPalette[color % 8];
    ++color;
    if (!pts.empty()) {
      svg << "<polyline class=\"series\" fill=\"none\" stroke=\"" << stroke
          << "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) svg << ' ';
        svg << format_double(std::round(pts[i].first * 100.0) / 100.0) << ','
            << format_double(std::round(pts[i].second * 100.0) / 100.0);
      }
      svg << "\"/>\n";
    }
    svg << "<line x1=\"" << right + 12 << "\" y1=\"" << legend_y - 4 << "\" x2=\"" << right + 34
        << "\" y2=\"" << legend_y - 4 << "\" stroke=\"" << stroke << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << right + 40 << "\" y=\"" << legend_y
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << "</text>\n";
    legend_y += 18;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

PlotSpec parse_plot_spec_text(const std::string& text) {
  PlotSpec spec;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const auto b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("plot spec line " + std::to_string(lineno) + ": expected key = value");
    }
    auto strip = [](std::string s) {
      const auto x = s.find_first_not_of(" \t");
      const auto y = s.find_last_not_of(" \t");
      return x == std::string::npos ? std::string{} : s.substr(x, y - x + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key == "x") {
      spec.x = value;
    } else if (key == "y") {
      spec.y.clear();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = strip(item);
        if (!item.empty()) spec.y.push_back(item);
      }
      if (spec.y.empty()) throw ConfigError("plot spec: empty y list");
    } else if (key == "out_prefix") {
      spec.out_prefix = value;
    } else {
      throw ConfigError("plot spec: unknown key '" + key + "'");
    }
  }
  return spec;
}

PlotSpec load_plot_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read plot spec " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_plot_spec_text(ss.str());
}

std::vector<std::string> emit_plots(const std::vector<MetricRecord>& records,
                                    const PlotSpec& spec, const std::string& out_dir) {
  std::vector<std::string> written;
  if (records.empty()) {
    std::cerr << "plot: no records, nothing to draw\n";
    return written;
  }
  std::filesystem::create_directories(out_dir);
  for (const auto& metric : spec.y) {
    const auto series = aggregate(records, spec.x, metric);
    const bool log_y = metric == "ser" || metric == "ber";
    const auto svg = svg_for(series, spec.x, metric, log_y);
    if (svg.empty()) {
      std::cerr << "plot: no plottable values for " << metric << ", skipped\n";
      continue;
    }
    const std::string path = out_dir + "/" + spec.out_prefix + "_" + metric + ".svg";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << svg;
    if (!f) throw IoError("short write to " + path);
    written.push_back(path);
  }
  return written;
}

}  // namespace bayesrx::sim
