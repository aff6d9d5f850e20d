#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riscom/csvfmt.hpp"
#include "riscom/ris.hpp"

namespace riscom {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All physical and simulation parameters. Defaults reproduce the reference
// operating point: 24 GHz carrier, 3 us PRI, 50 MHz bandwidth, G = 15
// m-sequence pulse, 15x15 half-wavelength RIS in 9 square subarrays, L = 21,
// 3-tap Rician tag-reader channel with 10 dB kappa and 15-sample spread.
struct SystemConfig {
  double carrier_frequency_hz = 24e9;
  double pri_s = 3e-6;
  double bandwidth_hz = 50e6;
  int processing_gain = 15;
  std::vector<int> msequence_taps = {};  // empty -> table default for the register length
  int ris_rows = 15;
  int ris_cols = 15;
  double element_spacing_wavelengths = 0.5;
  int n_subarrays = 9;
  int codeword_length = 21;
  double theta_st_az_deg = -45.0;
  double theta_st_el_deg = 0.0;
  double theta_bar_az_deg = 45.0;
  double theta_bar_el_deg = 0.0;
  int q_tr = 3;
  double kappa_tr_db = 10.0;
  int delay_spread_samples = 15;
  double tr_az_min_deg = 33.0;
  double tr_az_max_deg = 57.0;
  double tr_el_min_deg = -12.0;
  double tr_el_max_deg = 12.0;
  double sigma_st = 1.0;
  double sigma_tr = 1.0;
  double pulse_power = 1.0;
  std::vector<double> snr_grid_db = {-5.0, 0.0, 5.0};
  long long trials = 100000;
  long long sa_channel_draws = 10000;
  std::uint64_t seed = 1;
  double interference_amplitude = 1.0;
  double interference_delay_s = 0.0;
  double quadrature_rel_tol = 1e-8;

  double pulse_duration_s() const { return processing_gain / bandwidth_hz; }
  double delay_spread_s() const { return delay_spread_samples / bandwidth_hz; }
  int k_r() const { return processing_gain + delay_spread_samples; }
  int m_ris() const { return ris_rows * ris_cols; }

  int tiles_per_side() const {
    int t = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_subarrays))));
    return t;
  }

  Direction theta_st() const { return {theta_st_az_deg, theta_st_el_deg}; }
  Direction theta_bar() const { return {theta_bar_az_deg, theta_bar_el_deg}; }
  RisGeometry geometry() const { return {ris_rows, ris_cols, element_spacing_wavelengths}; }
  double kappa_tr_linear() const { return std::pow(10.0, kappa_tr_db / 10.0); }
};

namespace detail {

inline int msequence_register_length(int gain_g) {
  int r = 0;
  long v = static_cast<long>(gain_g) + 1;
  while (v > 1 && (v & 1) == 0) {
    v >>= 1;
    ++r;
  }
  if (v != 1 || r < 2) return -1;  // G + 1 not a power of two
  return r;
}

// Primitive feedback polynomials (exponents) per register length.
inline std::vector<int> default_msequence_taps(int register_length) {
  switch (register_length) {
    case 2: return {2, 1};
    case 3: return {3, 1};
    case 4: return {4, 1};
    case 5: return {5, 2};
    case 6: return {6, 1};
    case 7: return {7, 1};
    case 8: return {8, 4, 3, 2};
    case 9: return {9, 4};
    case 10: return {10, 3};
    case 11: return {11, 2};
    case 12: return {12, 6, 4, 1};
    case 13: return {13, 4, 3, 1};
    case 14: return {14, 10, 6, 1};
    case 15: return {15, 1};
    case 16: return {16, 15, 13, 4};
    default: return {};
  }
}

}  // namespace detail

inline ProbePulse make_pulse(const SystemConfig& cfg) {
  const int r = detail::msequence_register_length(cfg.processing_gain);
  if (r < 0)
    throw ConfigError("processing_gain must equal 2^r - 1 for an m-sequence pulse (got " +
                      std::to_string(cfg.processing_gain) + ")");
  std::vector<int> taps = cfg.msequence_taps;
  if (taps.empty()) taps = detail::default_msequence_taps(r);
  if (taps.empty())
    throw ConfigError("no default m-sequence taps for register length " + std::to_string(r) +
                      "; set msequence_taps");
  const std::uint32_t all_ones = (1u << r) - 1u;
  return msequence_pulse(r, taps, all_ones, cfg.bandwidth_hz);
}

inline void validate_config(const SystemConfig& cfg) {
  auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  if (!(cfg.carrier_frequency_hz > 0)) fail("carrier_frequency_hz must be > 0");
  if (!(cfg.pri_s > 0)) fail("pri_s must be > 0");
  if (!(cfg.bandwidth_hz > 0)) fail("bandwidth_hz must be > 0");
  if (cfg.processing_gain < 1) fail("processing_gain must be >= 1");
  if (detail::msequence_register_length(cfg.processing_gain) < 0)
    fail("processing_gain must equal 2^r - 1 for some r >= 2");
  if (cfg.ris_rows < 1 || cfg.ris_cols < 1) fail("ris_rows/ris_cols must be >= 1");
  if (!(cfg.element_spacing_wavelengths > 0)) fail("element_spacing_wavelengths must be > 0");
  if (cfg.n_subarrays < 1) fail("n_subarrays must be >= 1");
  const int t = cfg.tiles_per_side();
  if (t * t != cfg.n_subarrays) fail("n_subarrays must be a perfect square (square tiling)");
  if (cfg.ris_rows % t != 0 || cfg.ris_cols % t != 0)
    fail("RIS grid must divide into sqrt(n_subarrays) tiles per side");
  if (cfg.codeword_length < 2) fail("codeword_length must be >= 2");
  if (cfg.codeword_length < cfg.n_subarrays + 1)
    fail("codeword_length violates L >= N+1 (need one codeword per subarray plus the reserve)");
  if (cfg.q_tr < 1) fail("q_tr must be >= 1");
  if (cfg.delay_spread_samples < 0) fail("delay_spread_samples must be >= 0");
  if (!(cfg.sigma_st >= 0) || !(cfg.sigma_tr >= 0)) fail("sigma_st/sigma_tr must be >= 0");
  if (!(cfg.pulse_power > 0)) fail("pulse_power must be > 0");
  if (cfg.trials < 1) fail("trials must be >= 1");
  if (cfg.sa_channel_draws < 1) fail("sa_channel_draws must be >= 1");
  if (!(cfg.quadrature_rel_tol > 0) || cfg.quadrature_rel_tol >= 0.1)
    fail("quadrature_rel_tol must lie in (0, 0.1)");
  if (!(cfg.interference_delay_s >= 0)) fail("interference_delay_s must be >= 0");
  if (!(cfg.tr_az_min_deg <= cfg.tr_az_max_deg) || !(cfg.tr_el_min_deg <= cfg.tr_el_max_deg))
    fail("TR departure-angle rectangle is empty");
  // non-overlapping PRIs: T_PRI > T + delta_max
  if (!(cfg.pri_s > cfg.pulse_duration_s() + cfg.delay_spread_s()))
    fail("pri_s must exceed pulse duration plus delay spread (non-overlapping PRIs)");
}

namespace detail {

struct ParsedValue {
  std::string raw;
  int line = 0;
};

inline std::map<std::string, ParsedValue> parse_kv(const std::string& text,
                                                   const std::string& where) {
  std::map<std::string, ParsedValue> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string s = line;
    // strip comment (no string values in this grammar)
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t\r");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string val = trim(s.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError(where + ":" + std::to_string(lineno) + ": empty key or value");
    if (kv.count(key))
      throw ConfigError(where + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv[key] = {val, lineno};
  }
  return kv;
}

inline double to_double(const std::string& raw, const std::string& where, int line,
                        const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ":" + std::to_string(line) + ": key '" + key +
                      "': expected a number, got '" + raw + "'");
  }
}

inline std::vector<double> to_double_list(const std::string& raw, const std::string& where,
                                          int line, const std::string& key) {
  std::string s = raw;
  if (s.size() < 2 || s.front() != '[' || s.back() != ']')
    throw ConfigError(where + ":" + std::to_string(line) + ": key '" + key +
                      "': expected an array like [a, b, c]");
  s = s.substr(1, s.size() - 2);
  std::vector<double> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(to_double(item.substr(b, e - b + 1), where, line, key));
  }
  return out;
}

}  // namespace detail

// Parse the key-value config text (TOML-compatible scalars and flat numeric
// arrays). Unset keys keep the reference defaults; unknown keys are errors.
inline SystemConfig parse_config(const std::string& text, const std::string& where = "<config>") {
  SystemConfig cfg;
  auto kv = detail::parse_kv(text, where);

  auto take = [&](const char* key) -> const detail::ParsedValue* {
    auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    return &it->second;
  };
  auto num = [&](const char* key, double& slot) {
    if (const auto* pv = take(key)) slot = detail::to_double(pv->raw, where, pv->line, key);
  };
  auto num_int = [&](const char* key, int& slot) {
    if (const auto* pv = take(key)) {
      const double v = detail::to_double(pv->raw, where, pv->line, key);
      if (v != std::floor(v))
        throw ConfigError(where + ":" + std::to_string(pv->line) + ": key '" + key +
                          "': expected an integer");
      slot = static_cast<int>(v);
    }
  };
  auto num_ll = [&](const char* key, long long& slot) {
    if (const auto* pv = take(key)) {
      const double v = detail::to_double(pv->raw, where, pv->line, key);
      if (v != std::floor(v))
        throw ConfigError(where + ":" + std::to_string(pv->line) + ": key '" + key +
                          "': expected an integer");
      slot = static_cast<long long>(v);
    }
  };

  num("carrier_frequency_hz", cfg.carrier_frequency_hz);
  num("pri_s", cfg.pri_s);
  num("bandwidth_hz", cfg.bandwidth_hz);
  num_int("processing_gain", cfg.processing_gain);
  if (const auto* pv = take("msequence_taps")) {
    cfg.msequence_taps.clear();
    for (double v : detail::to_double_list(pv->raw, where, pv->line, "msequence_taps"))
      cfg.msequence_taps.push_back(static_cast<int>(v));
  }
  num_int("ris_rows", cfg.ris_rows);
  num_int("ris_cols", cfg.ris_cols);
  num("element_spacing_wavelengths", cfg.element_spacing_wavelengths);
  num_int("n_subarrays", cfg.n_subarrays);
  num_int("codeword_length", cfg.codeword_length);
  num("theta_st_az_deg", cfg.theta_st_az_deg);
  num("theta_st_el_deg", cfg.theta_st_el_deg);
  num("theta_bar_az_deg", cfg.theta_bar_az_deg);
  num("theta_bar_el_deg", cfg.theta_bar_el_deg);
  num_int("q_tr", cfg.q_tr);
  num("kappa_tr_db", cfg.kappa_tr_db);
  num_int("delay_spread_samples", cfg.delay_spread_samples);
  num("tr_az_min_deg", cfg.tr_az_min_deg);
  num("tr_az_max_deg", cfg.tr_az_max_deg);
  num("tr_el_min_deg", cfg.tr_el_min_deg);
  num("tr_el_max_deg", cfg.tr_el_max_deg);
  num("sigma_st", cfg.sigma_st);
  num("sigma_tr", cfg.sigma_tr);
  num("pulse_power", cfg.pulse_power);
  if (const auto* pv = take("snr_grid_db"))
    cfg.snr_grid_db = detail::to_double_list(pv->raw, where, pv->line, "snr_grid_db");
  num_ll("trials", cfg.trials);
  num_ll("sa_channel_draws", cfg.sa_channel_draws);
  if (const auto* pv = take("seed")) {
    try {
      cfg.seed = std::stoull(pv->raw);
    } catch (const std::exception&) {
      throw ConfigError(where + ":" + std::to_string(pv->line) +
                        ": key 'seed': expected an unsigned integer");
    }
  }
  num("interference_amplitude", cfg.interference_amplitude);
  num("interference_delay_s", cfg.interference_delay_s);
  num("quadrature_rel_tol", cfg.quadrature_rel_tol);

  static const char* known[] = {
      "carrier_frequency_hz", "pri_s", "bandwidth_hz", "processing_gain", "msequence_taps",
      "ris_rows", "ris_cols", "element_spacing_wavelengths", "n_subarrays", "codeword_length",
      "theta_st_az_deg", "theta_st_el_deg", "theta_bar_az_deg", "theta_bar_el_deg", "q_tr",
      "kappa_tr_db", "delay_spread_samples", "tr_az_min_deg", "tr_az_max_deg", "tr_el_min_deg",
      "tr_el_max_deg", "sigma_st", "sigma_tr", "pulse_power", "snr_grid_db", "trials",
      "sa_channel_draws", "seed", "interference_amplitude", "interference_delay_s",
      "quadrature_rel_tol"};
  for (const auto& [key, pv] : kv) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok)
      throw ConfigError(where + ":" + std::to_string(pv.line) + ": unknown key '" + key + "'");
  }

  validate_config(cfg);
  return cfg;
}

inline SystemConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str(), path);
}

/// Serialize every key (round-trips through parse_config).
inline std::string save_config(const SystemConfig& cfg) {
  std::ostringstream os;
  os << "carrier_frequency_hz = " << format_double(cfg.carrier_frequency_hz) << '\n';
  os << "pri_s = " << format_double(cfg.pri_s) << '\n';
  os << "bandwidth_hz = " << format_double(cfg.bandwidth_hz) << '\n';
  os << "processing_gain = " << cfg.processing_gain << '\n';
  if (!cfg.msequence_taps.empty()) {
    os << "msequence_taps = [";
    for (std::size_t i = 0; i < cfg.msequence_taps.size(); ++i)
      os << (i ? ", " : "") << cfg.msequence_taps[i];
    os << "]\n";
  }
  os << "ris_rows = " << cfg.ris_rows << '\n';
  os << "ris_cols = " << cfg.ris_cols << '\n';
  os << "element_spacing_wavelengths = " << format_double(cfg.element_spacing_wavelengths) << '\n';
  os << "n_subarrays = " << cfg.n_subarrays << '\n';
  os << "codeword_length = " << cfg.codeword_length << '\n';
  os << "theta_st_az_deg = " << format_double(cfg.theta_st_az_deg) << '\n';
  os << "theta_st_el_deg = " << format_double(cfg.theta_st_el_deg) << '\n';
  os << "theta_bar_az_deg = " << format_double(cfg.theta_bar_az_deg) << '\n';
  os << "theta_bar_el_deg = " << format_double(cfg.theta_bar_el_deg) << '\n';
  os << "q_tr = " << cfg.q_tr << '\n';
  os << "kappa_tr_db = " << format_double(cfg.kappa_tr_db) << '\n';
  os << "delay_spread_samples = " << cfg.delay_spread_samples << '\n';
  os << "tr_az_min_deg = " << format_double(cfg.tr_az_min_deg) << '\n';
  os << "tr_az_max_deg = " << format_double(cfg.tr_az_max_deg) << '\n';
  os << "tr_el_min_deg = " << format_double(cfg.tr_el_min_deg) << '\n';
  os << "tr_el_max_deg = " << format_double(cfg.tr_el_max_deg) << '\n';
  os << "sigma_st = " << format_double(cfg.sigma_st) << '\n';
  os << "sigma_tr = " << format_double(cfg.sigma_tr) << '\n';
  os << "pulse_power = " << format_double(cfg.pulse_power) << '\n';
  os << "snr_grid_db = [";
  for (std::size_t i = 0; i < cfg.snr_grid_db.size(); ++i)
    os << (i ? ", " : "") << format_double(cfg.snr_grid_db[i]);
  os << "]\n";
  os << "trials = " << cfg.trials << '\n';
  os << "sa_channel_draws = " << cfg.sa_channel_draws << '\n';
  os << "seed = " << format_uint(cfg.seed) << '\n';
  os << "interference_amplitude = " << format_double(cfg.interference_amplitude) << '\n';
  os << "interference_delay_s = " << format_double(cfg.interference_delay_s) << '\n';
  os << "quadrature_rel_tol = " << format_double(cfg.quadrature_rel_tol) << '\n';
  return os.str();
}

inline void save_config(const SystemConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write config file '" + path + "'");
  f << save_config(cfg);
}

/// FNV-1a over the canonical serialization; identifies a run's configuration.
inline std::uint64_t config_hash(const SystemConfig& cfg) {
  const std::string s = save_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace riscom
