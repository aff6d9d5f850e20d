// riscom: backscatter index-modulation simulator for an RIS-based MIMO radar.
//
// Subcommands write one CSV per run plus a JSON manifest (<out>.manifest.json)
// that pins the resolved configuration, seed and versions; re-running from
// the manifest reproduces the CSV byte for byte.
//
// Exit codes: 0 success, 1 usage, 2 config, 3 numerical failure,
// 4 validation failure.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "riscom/riscom.hpp"

namespace {

using nlohmann::json;
using namespace riscom;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitValidation = 4;

struct GlobalOptions {
  std::string config_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  long long trials = 0;
  bool trials_set = false;
  int threads = 0;  // 0 = hardware default
};

SystemConfig resolve_config(const GlobalOptions& g) {
  SystemConfig cfg = g.config_path.empty() ? SystemConfig{} : load_config(g.config_path);
  if (g.seed_set) cfg.seed = g.seed;
  if (g.trials_set) cfg.trials = g.trials;
  validate_config(cfg);
  return cfg;
}

json config_to_json(const SystemConfig& cfg) {
  json j;
  std::istringstream is(save_config(cfg));
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq - 1);
    const std::string val = line.substr(eq + 2);
    j[key] = val;
  }
  return j;
}

void write_manifest(const std::string& out_path, const std::string& subcommand,
                    const json& args, const SystemConfig& cfg, int threads) {
  json m;
  m["tool"] = "riscom";
  m["version"] = version_string;
  m["subcommand"] = subcommand;
  m["args"] = args;
  m["config"] = config_to_json(cfg);
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  m["config_hash"] = hash;
  m["seed"] = cfg.seed;
  m["threads"] = threads;
  std::ofstream f(out_path + ".manifest.json");
  if (!f) throw std::runtime_error("cannot write manifest next to '" + out_path + "'");
  f << m.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file '" + path + "'");
  return f;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "sweep_var,snr_db,pe,std_err,trials,method,seed\n";
  for (const auto& r : rows) {
    os << format_double(r.sweep_var) << ',' << format_double(r.snr_db) << ','
       << format_double(r.pe) << ',' << format_double(r.std_err) << ',' << format_int(r.trials)
       << ',' << to_string(r.method) << ',' << format_uint(r.seed) << '\n';
  }
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::istringstream is(csv);
  std::string item;
  while (std::getline(is, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::istringstream is(csv);
  std::string item;
  while (std::getline(is, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

int run_rate(const GlobalOptions& g, int n_active, int l_min, int l_max) {
  SystemConfig cfg = resolve_config(g);
  const auto curve = rate_curve(n_active, l_min, l_max);
  const std::string out = g.out_path.empty() ? "rate.csv" : g.out_path;
  auto f = open_out(out);
  f << "L,rate_bits_per_pri\n";
  for (const auto& p : curve)
    f << format_int(p.length_l) << ',' << format_double(p.rate) << '\n';
  write_manifest(out, "rate", {{"n", n_active}, {"l_min", l_min}, {"l_max", l_max}}, cfg,
                 g.threads);
  std::cout << "rate: " << curve.size() << " points, argmax L = " << rate_argmax(curve)
            << " -> " << out << '\n';
  return kExitOk;
}

int run_pe_vs_l(const GlobalOptions& g, const std::string& l_list_csv,
                const std::string& snr_csv, bool with_sa) {
  SystemConfig cfg = resolve_config(g);
  const std::vector<int> l_list =
      l_list_csv.empty() ? std::vector<int>{15, 21, 31, 41} : parse_int_list(l_list_csv);
  const std::vector<double> snr_list =
      snr_csv.empty() ? cfg.snr_grid_db : parse_double_list(snr_csv);
  const auto rows = sweep_pe_vs_l(cfg, snr_list, l_list, cfg.trials, with_sa, g.threads);
  const std::string out = g.out_path.empty() ? "pe_vs_l.csv" : g.out_path;
  auto f = open_out(out);
  write_sweep_csv(f, rows);
  json args;
  args["l_list"] = l_list;
  args["snr_db"] = snr_list;
  args["semianalytic"] = with_sa;
  args["trials"] = cfg.trials;
  write_manifest(out, "pe-vs-l", args, cfg, g.threads);
  std::cout << "pe-vs-l: " << rows.size() << " rows -> " << out << '\n';
  return kExitOk;
}

int run_pe_vs_spread(const GlobalOptions& g, const std::string& spread_csv,
                     const std::string& snr_csv, bool with_sa) {
  SystemConfig cfg = resolve_config(g);
  const std::vector<int> spread_list =
      spread_csv.empty() ? std::vector<int>{5, 10, 15, 20} : parse_int_list(spread_csv);
  const std::vector<double> snr_list =
      snr_csv.empty() ? cfg.snr_grid_db : parse_double_list(snr_csv);
  const auto rows =
      sweep_pe_vs_delay_spread(cfg, snr_list, spread_list, cfg.trials, with_sa, g.threads);
  const std::string out = g.out_path.empty() ? "pe_vs_spread.csv" : g.out_path;
  auto f = open_out(out);
  write_sweep_csv(f, rows);
  json args;
  args["spread_list"] = spread_list;
  args["snr_db"] = snr_list;
  args["semianalytic"] = with_sa;
  args["trials"] = cfg.trials;
  write_manifest(out, "pe-vs-spread", args, cfg, g.threads);
  std::cout << "pe-vs-spread: " << rows.size() << " rows -> " << out << '\n';
  return kExitOk;
}

int run_beampattern(const GlobalOptions& g, double az_min, double az_max, double az_step,
                    double el_min, double el_max, double el_step) {
  SystemConfig cfg = resolve_config(g);
  const Scene scene(cfg);
  const Eigen::VectorXcd gamma =
      steering_vector(scene.geometry, cfg.theta_st()) * cfg.sigma_st;
  const std::string out = g.out_path.empty() ? "beampattern.csv" : g.out_path;
  auto f = open_out(out);
  f << "az_deg,el_deg,b\n";
  long n_rows = 0;
  for (double el = el_min; el <= el_max + 1e-9; el += el_step) {
    for (double az = az_min; az <= az_max + 1e-9; az += az_step) {
      const double b = beampattern_closed(scene.beamformers, scene.partition, scene.geometry,
                                          gamma, {az, el}, cfg.codeword_length);
      f << format_double(az) << ',' << format_double(el) << ',' << format_double(b) << '\n';
      ++n_rows;
    }
  }
  json args;
  args["az"] = {az_min, az_max, az_step};
  args["el"] = {el_min, el_max, el_step};
  write_manifest(out, "beampattern", args, cfg, g.threads);
  std::cout << "beampattern: " << n_rows << " directions -> " << out << '\n';
  return kExitOk;
}

int run_single_frame(const GlobalOptions& g, const std::string& message_hex, double snr_db,
                     const std::string& dump_channel) {
  SystemConfig cfg = resolve_config(g);
  const Scene scene(cfg);

  Message msg;
  msg.n_bits = scene.codec.payload_bits();
  try {
    msg.value = BigInt(message_hex);  // accepts 0x-prefixed hex and decimal
  } catch (const std::exception&) {
    std::cerr << "error: cannot parse message '" << message_hex << "'\n";
    return kExitUsage;
  }
  if (msg.value < 0 || (msg.value >> msg.n_bits) != 0) {
    std::cerr << "error: message exceeds the " << msg.n_bits << "-bit payload\n";
    return kExitUsage;
  }

  const MessageSubset sent = encode_message(msg, scene.codec);
  const SpaceTimeCode code =
      space_time_code(scene.codebook, sent, identity_assignment(cfg.n_subarrays),
                      scene.partition, scene.beamformers);

  RngStream st_rng(cfg.seed, Stream::st_phase, 0);
  RngStream tr_rng(cfg.seed, Stream::tr_taps, 0);
  const StChannel st = draw_st_channel(cfg.sigma_st, cfg.theta_st(), scene.geometry, st_rng);
  const TrChannel tr = draw_tr_channel(scene.tr_params, tr_rng);
  const CompositeSignature sig = assemble_composite(
      scene.pulse, st, tr, scene.geometry, scene.partition, scene.beamformers, cfg.k_r(),
      scene.i_sr);
  if (!dump_channel.empty()) {
    auto f = open_out(dump_channel);
    write_tr_channel_csv(tr, f);
  }

  const double snr = std::pow(10.0, snr_db / 10.0);
  const double sigma2 = scene.noise_variance(snr);
  RngStream noise(cfg.seed, Stream::noise, 0);
  const ReceivedFrame frame = synthesize_frame(code, sig, sigma2, noise);
  const EnergyStatistics stats = matched_filter_energies(frame, scene.codebook);
  const MessageSubset detected = detect_subset(stats, cfg.n_subarrays);

  auto print_subset = [](const MessageSubset& s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.indices.size(); ++i)
      out += (i ? "," : "") + std::to_string(s.indices[i]);
    return out + "}";
  };
  std::cout << "message: " << message_hex << " (" << msg.n_bits << " bits)\n";
  std::cout << "transmitted: " << print_subset(sent) << '\n';
  std::cout << "detected:    " << print_subset(detected) << '\n';
  const auto decoded = decode_message(detected, scene.codec);
  if (decoded.has_value()) {
    std::ostringstream hex;
    hex << "0x" << std::hex << decoded->value;
    std::cout << "decoded:     " << hex.str() << '\n';
  } else {
    std::cout << "decoded:     erasure (rank beyond the payload region)\n";
  }
  std::cout << "match: " << (detected == sent ? "yes" : "no") << '\n';
  return kExitOk;
}

#define VCHECK(cond, what)                          \
  do {                                              \
    if (cond) {                                     \
      std::cout << "ok: " << what << '\n';          \
    } else {                                        \
      std::cout << "FAIL: " << what << '\n';        \
      failures += 1;                                \
    }                                               \
  } while (0)

int run_validate(const GlobalOptions& g) {
  SystemConfig cfg = resolve_config(g);
  int failures = 0;

  {  // codebook orthogonality
    const Codebook cb = build_codebook(cfg.codeword_length);
    const Eigen::MatrixXcd gram = cb.codewords.adjoint() * cb.codewords;
    const double err = (gram - Eigen::MatrixXcd::Identity(cfg.codeword_length - 1,
                                                          cfg.codeword_length - 1) *
                                   static_cast<double>(cfg.codeword_length))
                           .cwiseAbs()
                           .maxCoeff();
    double ones_err = 0.0;
    for (int j = 0; j < cfg.codeword_length - 1; ++j)
      ones_err = std::max(ones_err, std::abs(cb.ones_direction().dot(cb.codewords.col(j))));
    VCHECK(err <= 1e-9 * cfg.codeword_length && ones_err <= 1e-9 * cfg.codeword_length,
           "codebook Gram = L*I and codewords orthogonal to 1_L");
  }

  {  // rate optimum
    const auto curve = rate_curve(9, 10, 60);
    VCHECK(rate_argmax(curve) == 21, "rate argmax at L = 21 for N = 9");
  }

  {  // rank/unrank bijection at desk scale
    bool ok = true;
    const SubsetCodec codec(12, 5);
    const BigInt total = binomial(11, 5);
    for (BigInt r = 0; r < total; ++r) ok = ok && codec.rank(codec.unrank(r)) == r;
    VCHECK(ok, "subset rank/unrank bijection (L=12, N=5)");
  }

  {  // m-sequence sanity
    const ProbePulse p = make_pulse(cfg);
    std::complex<double> sum(0.0, 0.0);
    for (const auto& c : p.chips) sum += c;
    VCHECK(p.gain() == cfg.processing_gain && std::abs(std::abs(sum) - 1.0) <= 1e-12,
           "m-sequence pulse length and balance");
  }

  const Scene scene(cfg);

  {  // beampattern invariance and closed-form match
    const Eigen::VectorXcd gamma =
        steering_vector(scene.geometry, cfg.theta_st()) * cfg.sigma_st;
    RngStream rng(cfg.seed, Stream::message, 1);
    bool ok = true;
    const std::vector<Direction> dirs = {{45.0, 0.0}, {-45.0, 0.0}, {0.0, 0.0}, {30.0, -10.0}};
    double reference = -1.0;
    for (int rep = 0; rep < 3; ++rep) {
      const BigInt span = binomial(cfg.codeword_length - 1, cfg.n_subarrays);
      const MessageSubset subset =
          scene.codec.unrank(BigInt(rng.next_u64()) % span);
      const SpaceTimeCode code =
          space_time_code(scene.codebook, subset, identity_assignment(cfg.n_subarrays),
                          scene.partition, scene.beamformers);
      double sum_b = 0.0;
      for (const Direction& d : dirs) {
        const double closed = beampattern_closed(scene.beamformers, scene.partition,
                                                 scene.geometry, gamma, d, cfg.codeword_length);
        const double expl = beampattern_explicit(code, scene.geometry, gamma, d);
        ok = ok && std::abs(closed - expl) <= 1e-9 * std::max(1.0, closed);
        sum_b += closed;
      }
      if (reference < 0.0)
        reference = sum_b;
      else
        ok = ok && std::abs(sum_b - reference) <= 1e-9 * reference;
    }
    VCHECK(ok, "beampattern independent of the selected codewords, closed = explicit");
  }

  {  // noiseless end-to-end
    bool ok = true;
    for (std::uint64_t t = 0; t < 20; ++t) {
      const Message msg = scene.draw_message(t);
      const MessageSubset sent = encode_message(msg, scene.codec);
      const SpaceTimeCode code =
          space_time_code(scene.codebook, sent, identity_assignment(cfg.n_subarrays),
                          scene.partition, scene.beamformers);
      const CompositeSignature sig = scene.draw_signature(t);
      RngStream noise(cfg.seed, Stream::noise, t);
      const ReceivedFrame frame = synthesize_frame_fast(scene.codebook, code, sig, 0.0, noise);
      const MessageSubset detected =
          detect_subset(matched_filter_energies(frame, scene.codebook), cfg.n_subarrays);
      ok = ok && detected == sent;
    }
    VCHECK(ok, "noiseless frames decode exactly");
  }

  {  // interference invariance (bitwise)
    bool ok = true;
    std::vector<double> reference;
    for (double amp : {0.0, 1.0, 1e3, 1e6}) {
      SystemConfig c2 = cfg;
      c2.interference_amplitude = amp;
      Scene s2(c2);
      const Message msg = s2.draw_message(0);
      const MessageSubset sent = encode_message(msg, s2.codec);
      const SpaceTimeCode code =
          space_time_code(s2.codebook, sent, identity_assignment(c2.n_subarrays), s2.partition,
                          s2.beamformers);
      const CompositeSignature sig = s2.draw_signature(0);
      RngStream noise(c2.seed, Stream::noise, 0);
      const ReceivedFrame frame =
          synthesize_frame_fast(s2.codebook, code, sig, s2.noise_variance(1.0), noise);
      const EnergyStatistics st = matched_filter_energies(frame, s2.codebook);
      if (reference.empty()) {
        reference.assign(st.t_values.data(), st.t_values.data() + st.t_values.size());
      } else {
        for (Eigen::Index j = 0; j < st.t_values.size(); ++j)
          ok = ok && st.t_values(j) == reference[static_cast<std::size_t>(j)];
      }
    }
    VCHECK(ok, "matched-filter statistics bit-identical across SR amplitudes");
  }

  {  // special-function identities
    bool ok = true;
    for (int k : {1, 4, 30}) {
      for (double b : {0.5, 2.0, 7.0}) {
        ok = ok &&
             std::abs(marcum_q(k, 0.0, b) - (1.0 - erlang_cdf(k, 0.5 * b * b))) <= 1e-12;
      }
    }
    const auto norm = integrate_to_erlang_tail(
        [](double x) { return erlang_pdf(30, x); }, 30, 1, 1e-9);
    ok = ok && std::abs(norm.value - 1.0) <= 1e-8;
    VCHECK(ok, "Marcum/Erlang identity and density normalization");
  }

  if (failures > 0) {
    std::cout << failures << " validation check(s) failed\n";
    return kExitValidation;
  }
  std::cout << "all validation checks passed\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backscatter index-modulation simulator for an RIS-based MIMO radar"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Config file (key = value, TOML-style)");
  auto* seed_opt = app.add_option("--seed", g.seed, "Override the config seed");
  auto* trials_opt = app.add_option("--trials", g.trials, "Override the config trial count");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware)");
  app.add_option("--out", g.out_path, "Output CSV path");

  auto* rate = app.add_subcommand("rate", "Transmission rate versus codeword length");
  int rate_n = 9, l_min = 10, l_max = 60;
  rate->add_option("--n", rate_n, "Active codewords per frame");
  rate->add_option("--l-min", l_min, "Smallest codeword length");
  rate->add_option("--l-max", l_max, "Largest codeword length");

  auto* pevl = app.add_subcommand("pe-vs-l", "Error probability versus codeword length");
  std::string l_list, snr_list_1;
  bool sa1 = false;
  pevl->add_option("--l-list", l_list, "Comma-separated codeword lengths (default 15,21,31,41)");
  pevl->add_option("--snr-db", snr_list_1, "Comma-separated SNR grid in dB (default from config)");
  pevl->add_flag("--semianalytic", sa1, "Add semi-analytic overlay rows");

  auto* pevs = app.add_subcommand("pe-vs-spread", "Error probability versus delay spread");
  std::string spread_list, snr_list_2;
  bool sa2 = false;
  pevs->add_option("--spread-list", spread_list,
                   "Comma-separated spreads in samples (default 5,10,15,20)");
  pevs->add_option("--snr-db", snr_list_2, "Comma-separated SNR grid in dB (default from config)");
  pevs->add_flag("--semianalytic", sa2, "Add semi-analytic overlay rows");

  auto* beam = app.add_subcommand("beampattern", "Radiated energy over a direction grid");
  double az_min = -90.0, az_max = 90.0, az_step = 5.0;
  double el_min = -30.0, el_max = 30.0, el_step = 5.0;
  beam->add_option("--az-min", az_min);
  beam->add_option("--az-max", az_max);
  beam->add_option("--az-step", az_step);
  beam->add_option("--el-min", el_min);
  beam->add_option("--el-max", el_max);
  beam->add_option("--el-step", el_step);

  auto* single = app.add_subcommand("single-frame", "Encode, transmit and detect one frame");
  std::string message_hex = "0x0";
  double snr_db = 0.0;
  std::string dump_channel;
  single->add_option("--message", message_hex, "Payload as hex (0x...) or decimal");
  single->add_option("--snr-db", snr_db, "Operating SNR in dB");
  single->add_option("--dump-channel", dump_channel, "Write the TR channel draw to a CSV");

  auto* validate = app.add_subcommand("validate", "Run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  g.seed_set = seed_opt->count() > 0;
  g.trials_set = trials_opt->count() > 0;

  try {
    if (rate->parsed()) return run_rate(g, rate_n, l_min, l_max);
    if (pevl->parsed()) return run_pe_vs_l(g, l_list, snr_list_1, sa1);
    if (pevs->parsed()) return run_pe_vs_spread(g, spread_list, snr_list_2, sa2);
    if (beam->parsed())
      return run_beampattern(g, az_min, az_max, az_step, el_min, el_max, el_step);
    if (single->parsed()) return run_single_frame(g, message_hex, snr_db, dump_channel);
    if (validate->parsed()) return run_validate(g);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const QuadratureError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
