#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
};

RunResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd =
      "cd " + dir.string() + " && " + std::string(RISCOM_CLI_PATH) + " " + args + " > " +
      log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(rc);
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  r.stdout_text = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("riscom_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("rate subcommand finds the L=21 optimum", "[cli]") {
  const fs::path dir = fresh_dir("rate");
  const RunResult r = run_cli("--out rate.csv rate --n 9 --l-min 10 --l-max 60", dir);
  REQUIRE(r.exit_code == 0);

  std::ifstream f(dir / "rate.csv");
  std::string line;
  REQUIRE(std::getline(f, line));
  CHECK(line == "L,rate_bits_per_pri");
  int best_l = 0;
  double best = -1.0;
  int rows = 0;
  while (std::getline(f, line)) {
    const auto comma = line.find(',');
    const int l = std::stoi(line.substr(0, comma));
    const double rate = std::stod(line.substr(comma + 1));
    if (rate > best) {
      best = rate;
      best_l = l;
    }
    ++rows;
  }
  CHECK(rows == 51);
  CHECK(best_l == 21);
  CHECK(fs::exists(dir / "rate.csv.manifest.json"));
}

TEST_CASE("single-frame decodes at high SNR", "[cli]") {
  const fs::path dir = fresh_dir("single");
  const RunResult r = run_cli("single-frame --message 0x00000 --snr-db 100", dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.stdout_text.find("match: yes") != std::string::npos);

  // oversized payloads are usage errors
  const RunResult big = run_cli("single-frame --message 0xFFFFFFFFFF --snr-db 100", dir);
  CHECK(big.exit_code == 1);
}

TEST_CASE("pe-vs-l reruns are byte-identical", "[cli]") {
  const fs::path dir = fresh_dir("pevl");
  const std::string args =
      "--seed 7 --trials 500 --out run.csv pe-vs-l --l-list 10,12 --snr-db 0";
  REQUIRE(run_cli(args, dir).exit_code == 0);
  const std::string first = slurp(dir / "run.csv");
  REQUIRE(run_cli(args, dir).exit_code == 0);
  const std::string second = slurp(dir / "run.csv");
  CHECK(first == second);
  CHECK(first.rfind("sweep_var,snr_db,pe,std_err,trials,method,seed\n", 0) == 0);
  CHECK(first.find("monte-carlo") != std::string::npos);

  // thread-count invariance of the file bytes
  const std::string threaded =
      "--seed 7 --trials 500 --threads 1 --out run1.csv pe-vs-l --l-list 10,12 --snr-db 0";
  REQUIRE(run_cli(threaded, dir).exit_code == 0);
  CHECK(slurp(dir / "run1.csv") == first);
}

TEST_CASE("beampattern grid export", "[cli]") {
  const fs::path dir = fresh_dir("beam");
  const RunResult r = run_cli("--out b.csv beampattern", dir);
  REQUIRE(r.exit_code == 0);
  std::ifstream f(dir / "b.csv");
  std::string line;
  REQUIRE(std::getline(f, line));
  CHECK(line == "az_deg,el_deg,b");
  int rows = 0;
  while (std::getline(f, line)) ++rows;
  CHECK(rows == 37 * 13);
}

TEST_CASE("config errors exit with code 2", "[cli]") {
  const fs::path dir = fresh_dir("cfg");
  {
    std::ofstream f(dir / "bad.toml");
    f << "codeword_length = 5\nn_subarrays = 9\n";
  }
  const RunResult r = run_cli("--config bad.toml rate", dir);
  CHECK(r.exit_code == 2);
  CHECK(r.stdout_text.find("L >= N+1") != std::string::npos);

  const RunResult missing = run_cli("--config nope.toml rate", dir);
  CHECK(missing.exit_code == 2);
}

TEST_CASE("usage errors exit with code 1", "[cli]") {
  const fs::path dir = fresh_dir("usage");
  CHECK(run_cli("no-such-subcommand", dir).exit_code == 1);
  CHECK(run_cli("", dir).exit_code == 1);
}

TEST_CASE("validate subcommand passes on the default config", "[cli]") {
  const fs::path dir = fresh_dir("validate");
  const RunResult r = run_cli("validate", dir);
  REQUIRE(r.exit_code == 0);
  CHECK(r.stdout_text.find("all validation checks passed") != std::string::npos);
  CHECK(r.stdout_text.find("FAIL") == std::string::npos);
}

TEST_CASE("single-frame can dump the channel realization", "[cli]") {
  const fs::path dir = fresh_dir("dump");
  const RunResult r =
      run_cli("single-frame --message 0x1 --snr-db 20 --dump-channel taps.csv", dir);
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "taps.csv");
  CHECK(csv.rfind("tap,amp_re,amp_im,az_deg,el_deg,delay_s\n", 0) == 0);
  // default config draws Q_TR = 3 taps
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
