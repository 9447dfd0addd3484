#include "modem/block.hpp"

#include "common/errors.hpp"

namespace bayesrx::modem {

std::size_t symbols_per_codeword(std::size_t block_length, std::size_t bits_per_symbol) {
  return (block_length + bits_per_symbol - 1) / bits_per_symbol;
}

std::vector<std::uint8_t> pad_codeword(std::span<const std::uint8_t> codeword,
                                       std::size_t bits_per_symbol) {
  std::vector<std::uint8_t> padded(codeword.begin(), codeword.end());
  padded.resize(symbols_per_codeword(codeword.size(), bits_per_symbol) * bits_per_symbol, 0);
  return padded;
}

TransmissionBlock make_block(const BlockConfig& cfg, const ChannelMatrix& h,
                             std::mt19937_64& rng) {
  if (cfg.users == 0 || cfg.antennas == 0) throw ConfigError("users and antennas must be positive");
  if (cfg.constellation == nullptr) throw ConfigError("constellation missing");
  if (cfg.pilot_count == 0) throw ConfigError("pilot_count must be positive");
  if (h.users != cfg.users || h.antennas != cfg.antennas) {
    throw ConfigError("channel matrix dimensions do not match users/antennas");
  }

  const Constellation& con = *cfg.constellation;
  TransmissionBlock blk;
  blk.users = cfg.users;
  blk.antennas = cfg.antennas;
  blk.pilot_count = cfg.pilot_count;
  blk.info_count = cfg.info_count;
  blk.constellation = cfg.constellation;
  blk.channel = h;
  blk.snr_db = cfg.snr_db;
  blk.noise_stddev = sigma_from_snr_db(cfg.snr_db);

  const std::size_t total = blk.total_count();
  blk.symbols.assign(total * cfg.users, 0);
  std::uniform_int_distribution<std::size_t> pick(0, con.size() - 1);

  for (std::size_t i = 0; i < cfg.pilot_count; ++i) {
    for (std::size_t k = 0; k < cfg.users; ++k) blk.symbols[i * cfg.users + k] = pick(rng);
  }

  if (cfg.code == nullptr) {
    for (std::size_t i = cfg.pilot_count; i < total; ++i) {
      for (std::size_t k = 0; k < cfg.users; ++k) blk.symbols[i * cfg.users + k] = pick(rng);
    }
  } else {
    const code::CodeSpec& code = *cfg.code;
    const std::size_t cw_symbols = symbols_per_codeword(code.block_length, con.bits_per_symbol);
    if (cfg.info_count == 0 || cfg.info_count % cw_symbols != 0) {
      throw ConfigError("info_count must be a positive multiple of " + std::to_string(cw_symbols) +
                        " symbols per codeword");
    }
    blk.codewords_per_user = cfg.info_count / cw_symbols;
    blk.message_bits.assign(cfg.users, {});
    blk.codeword_bits.assign(cfg.users, {});
    std::uniform_int_distribution<int> bit(0, 1);
    for (std::size_t k = 0; k < cfg.users; ++k) {
      std::vector<std::size_t> user_syms;
      user_syms.reserve(cfg.info_count);
      for (std::size_t c = 0; c < blk.codewords_per_user; ++c) {
        std::vector<std::uint8_t> msg(code.message_length);
        for (auto& b : msg) b = static_cast<std::uint8_t>(bit(rng));
        auto cw = code::encode(code, msg);
        auto padded = pad_codeword(cw, con.bits_per_symbol);
        auto syms = symbol_indices(padded, con);
        user_syms.insert(user_syms.end(), syms.begin(), syms.end());
        auto& mb = blk.message_bits[k];
        mb.insert(mb.end(), msg.begin(), msg.end());
        auto& cb = blk.codeword_bits[k];
        cb.insert(cb.end(), cw.begin(), cw.end());
      }
      for (std::size_t i = 0; i < cfg.info_count; ++i) {
        blk.symbols[(cfg.pilot_count + i) * cfg.users + k] = user_syms[i];
      }
    }
  }

  blk.outputs.assign(total * cfg.antennas, Cx{});
  std::vector<Cx> s(cfg.users);
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t k = 0; k < cfg.users; ++k) s[k] = con.points[blk.symbols[i * cfg.users + k]];
    const auto y = cfg.kind == ChannelKind::linear
                       ? apply_linear_channel(h, s, blk.noise_stddev, rng)
                       : apply_tanh_channel(h, s, blk.noise_stddev, rng);
    for (std::size_t n = 0; n < cfg.antennas; ++n) blk.outputs[i * cfg.antennas + n] = y[n];
  }
  return blk;
}

}  // namespace bayesrx::modem
