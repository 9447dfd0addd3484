#include "sim/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "common/errors.hpp"
#include "common/seeds.hpp"

namespace bayesrx::sim {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size() || x < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<double> parse_real_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("key '" + key + "': empty list entry");
    out.push_back(parse_real(key, item));
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string to_string(DetectorMode m) {
  switch (m) {
    case DetectorMode::frequentist: return "F";
    case DetectorMode::bayesian: return "B";
    case DetectorMode::modular_bayesian: return "MB";
    case DetectorMode::blackbox: return "blackbox";
  }
  return "?";
}

std::string to_string(DecoderMode m) {
  switch (m) {
    case DecoderMode::none: return "none";
    case DecoderMode::frequentist: return "F";
    case DecoderMode::bayesian: return "B";
    case DecoderMode::modular_bayesian: return "MB";
    case DecoderMode::plain_bp: return "plainBP";
  }
  return "?";
}

DetectorMode detector_mode_from_string(const std::string& s) {
  if (s == "F") return DetectorMode::frequentist;
  if (s == "B") return DetectorMode::bayesian;
  if (s == "MB") return DetectorMode::modular_bayesian;
  if (s == "blackbox") return DetectorMode::blackbox;
  throw ConfigError("key 'detector_mode': unknown mode '" + s + "' (use F, B, MB, blackbox)");
}

DecoderMode decoder_mode_from_string(const std::string& s) {
  if (s == "none") return DecoderMode::none;
  if (s == "F") return DecoderMode::frequentist;
  if (s == "B") return DecoderMode::bayesian;
  if (s == "MB") return DecoderMode::modular_bayesian;
  if (s == "plainBP") return DecoderMode::plain_bp;
  throw ConfigError("key 'decoder_mode': unknown mode '" + s +
                    "' (use none, F, B, MB, plainBP)");
}

double ExperimentConfig::effective_decoder_train_snr() const {
  if (decoder_train_snr_set) return decoder_train_snr_db;
  const auto [lo, hi] = std::minmax_element(snr_db.begin(), snr_db.end());
  return (*lo + *hi) / 2.0;
}

std::string ExperimentConfig::csv_path() const { return out_dir + "/" + out_csv; }

std::string ExperimentConfig::decoder_file() const {
  if (!decoder_path.empty() && decoder_path.front() == '/') return decoder_path;
  return out_dir + "/" + decoder_path;
}

std::string ExperimentConfig::fingerprint() const {
  std::string canon;
  const auto add = [&](const std::string& k, const std::string& v) {
    canon += k;
    canon += '=';
    canon += v;
    canon += ';';
  };
  add("channel", channel == ChannelModel::linear   ? "linear"
                 : channel == ChannelModel::tanh_sat ? "tanh"
                                                     : "trace:" + trace_path);
  add("constellation", modem::constellation(constellation).name);
  add("users", std::to_string(users));
  add("antennas", std::to_string(antennas));
  add("detector_iterations", std::to_string(detector_iterations));
  add("decoder_iterations", std::to_string(decoder_iterations));
  add("pilots", std::to_string(pilots));
  add("info", std::to_string(info));
  add("blocks", std::to_string(blocks));
  std::string snrs;
  for (double s : snr_db) {
    snrs += format_real(s);
    snrs += ',';
  }
  add("snr_db", snrs);
  add("detector_mode", to_string(detector_mode));
  add("decoder_mode", to_string(decoder_mode));
  add("detector_ensemble", std::to_string(detector_ensemble));
  add("decoder_ensemble", std::to_string(decoder_ensemble));
  add("beta", format_real(beta));
  add("detector_adam_steps", std::to_string(detector_adam_steps));
  add("detector_lr", format_real(detector_lr));
  add("decoder_adam_steps", std::to_string(decoder_adam_steps));
  add("decoder_lr", format_real(decoder_lr));
  add("drop_prob_init", format_real(drop_prob_init));
  add("temperature", format_real(temperature));
  add("prior_stddev", format_real(prior_stddev));
  add("seed", std::to_string(seed));
  add("ece_bins", std::to_string(ece_bins));
  add("code", code == CodeChoice::none        ? "none"
              : code == CodeChoice::hamming74 ? "hamming74"
                                              : "polar128_64");
  add("decoder_train_snr_db", format_real(effective_decoder_train_snr()));
  add("decoder_train_frames", std::to_string(decoder_train_frames));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon.c_str())));
  return buf;
}

void ExperimentConfig::validate() const {
  if (users == 0) throw ConfigError("key 'users': must be positive");
  if (antennas == 0) throw ConfigError("key 'antennas': must be positive");
  if (pilots == 0) throw ConfigError("key 'pilots': must be positive");
  if (blocks == 0) throw ConfigError("key 'blocks': must be positive");
  if (info == 0) throw ConfigError("key 'info': must be positive");
  if (detector_iterations == 0) throw ConfigError("key 'detector_iterations': must be positive");
  if (decoder_iterations == 0) throw ConfigError("key 'decoder_iterations': must be positive");
  if (snr_db.empty()) throw ConfigError("key 'snr_db': must list at least one value");
  if (detector_ensemble == 0) throw ConfigError("key 'detector_ensemble': must be positive");
  if (decoder_ensemble == 0) throw ConfigError("key 'decoder_ensemble': must be positive");
  if (ece_bins == 0) throw ConfigError("key 'ece_bins': must be positive");
  if (channel == ChannelModel::trace && trace_path.empty()) {
    throw ConfigError("key 'channel': trace channel needs a path (channel = trace:<path>)");
  }
  if (decoder_mode != DecoderMode::none && code == CodeChoice::none) {
    throw ConfigError("key 'code': decoding requires a code (hamming74 or polar128_64)");
  }
  if (decoder_mode != DecoderMode::none) {
    const std::size_t block_len = code == CodeChoice::hamming74 ? 7 : 128;
    const auto& con = modem::constellation(constellation);
    const std::size_t per_cw = modem::symbols_per_codeword(block_len, con.bits_per_symbol);
    if (info % per_cw != 0) {
      throw ConfigError("key 'info': must be a multiple of " + std::to_string(per_cw) +
                        " symbols per codeword for this code/constellation");
    }
  }
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& raw_key,
                        const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key.empty() || value.empty()) throw ConfigError("expected key = value");

  if (key == "channel") {
    if (value == "linear") {
      cfg.channel = ChannelModel::linear;
    } else if (value == "tanh") {
      cfg.channel = ChannelModel::tanh_sat;
    } else if (value.rfind("trace:", 0) == 0) {
      cfg.channel = ChannelModel::trace;
      cfg.trace_path = value.substr(6);
    } else {
      throw ConfigError("key 'channel': unknown model '" + value +
                        "' (use linear, tanh, trace:<path>)");
    }
  } else if (key == "constellation") {
    cfg.constellation = modem::constellation_from_name(value);
  } else if (key == "users") {
    cfg.users = parse_count(key, value);
  } else if (key == "antennas") {
    cfg.antennas = parse_count(key, value);
  } else if (key == "detector_iterations") {
    cfg.detector_iterations = parse_count(key, value);
  } else if (key == "decoder_iterations") {
    cfg.decoder_iterations = parse_count(key, value);
  } else if (key == "pilots") {
    cfg.pilots = parse_count(key, value);
  } else if (key == "info") {
    cfg.info = parse_count(key, value);
  } else if (key == "blocks") {
    cfg.blocks = parse_count(key, value);
  } else if (key == "snr_db") {
    cfg.snr_db = parse_real_list(key, value);
  } else if (key == "detector_mode") {
    cfg.detector_mode = detector_mode_from_string(value);
  } else if (key == "decoder_mode") {
    cfg.decoder_mode = decoder_mode_from_string(value);
  } else if (key == "detector_ensemble") {
    cfg.detector_ensemble = parse_count(key, value);
  } else if (key == "decoder_ensemble") {
    cfg.decoder_ensemble = parse_count(key, value);
  } else if (key == "beta") {
    cfg.beta = parse_real(key, value);
  } else if (key == "detector_adam_steps") {
    cfg.detector_adam_steps = parse_count(key, value);
  } else if (key == "detector_lr") {
    cfg.detector_lr = parse_real(key, value);
  } else if (key == "decoder_adam_steps") {
    cfg.decoder_adam_steps = parse_count(key, value);
  } else if (key == "decoder_lr") {
    cfg.decoder_lr = parse_real(key, value);
  } else if (key == "drop_prob_init") {
    cfg.drop_prob_init = parse_real(key, value);
  } else if (key == "temperature") {
    cfg.temperature = parse_real(key, value);
  } else if (key == "prior_stddev") {
    cfg.prior_stddev = parse_real(key, value);
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_count(key, value));
  } else if (key == "ece_bins") {
    cfg.ece_bins = parse_count(key, value);
  } else if (key == "code") {
    if (value == "none") {
      cfg.code = CodeChoice::none;
    } else if (value == "hamming74") {
      cfg.code = CodeChoice::hamming74;
    } else if (value == "polar128_64") {
      cfg.code = CodeChoice::polar128_64;
    } else {
      throw ConfigError("key 'code': unknown code '" + value +
                        "' (use none, hamming74, polar128_64)");
    }
  } else if (key == "decoder_train_snr_db") {
    cfg.decoder_train_snr_db = parse_real(key, value);
    cfg.decoder_train_snr_set = true;
  } else if (key == "decoder_train_frames") {
    cfg.decoder_train_frames = parse_count(key, value);
  } else if (key == "record_runtime") {
    cfg.record_runtime = parse_bool(key, value);
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else if (key == "out_csv") {
    cfg.out_csv = value;
  } else if (key == "decoder_path") {
    cfg.decoder_path = value;
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value, got '" + stripped + "'");
    }
    try {
      apply_config_entry(cfg, stripped.substr(0, eq), stripped.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace bayesrx::sim
