#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>

#ifndef SIGPROP_CLI_PATH
#error "SIGPROP_CLI_PATH must point at the sigprop executable"
#endif

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(SIGPROP_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

int data_rows(const std::string& csv) {
  int rows = -1;  // header
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const auto nl = csv.find('\n', pos);
    if (csv[pos] != '#') ++rows;
    pos = nl == std::string::npos ? csv.size() : nl + 1;
  }
  return rows;
}

}  // namespace

TEST_CASE("theory curve") {
  auto r = run("theory curve --beta 2 --rho 0");
  CHECK(r.code == 0);
  CHECK(r.out.find("2,0,1.414213562,0.2928932188,") != std::string::npos);

  r = run("theory curve --beta 1 --rho 0");
  CHECK(r.code == 0);
  CHECK(r.out.find("1,0,1.414213562,0,0,0,0,1\n") != std::string::npos);

  r = run("theory curve --beta 1 --rho-range 0:0.5:6 --T 1024");
  CHECK(r.code == 0);
  CHECK(data_rows(r.out) == 6);
  CHECK(r.out.find("y_q_finite") != std::string::npos);

  CHECK(run("theory curve --rho 0").code == 2);
  CHECK(run("theory curve --beta 1 --rho 0 --rho-range 0:1:3").code == 2);
  CHECK(run("theory curve --beta 1").code == 2);
}

TEST_CASE("theory depth and fixed point") {
  auto r = run("theory depth --layers 1");
  CHECK(r.code == 0);
  CHECK(data_rows(r.out) == 2);
  CHECK(r.out.find("# layers = 1\n") != std::string::npos);

  r = run("theory fixed-point --activation tanh --sigma-w2 6.25 --sigma-b2 0.1 --alpha-sa 6 --rho0 0.04");
  CHECK(r.code == 0);
  CHECK(r.out.find(",true,") != std::string::npos);
}

TEST_CASE("flags override the config file") {
  const auto path = std::filesystem::temp_directory_path() / "sigprop_cli_test.conf";
  {
    std::ofstream f(path);
    f << "layers = 7\nalpha_sa = 2\n";
  }
  auto r = run("--config " + path.string() + " theory depth");
  CHECK(data_rows(r.out) == 8);
  CHECK(r.out.find("# alpha_sa = 2\n") != std::string::npos);
  r = run("--config " + path.string() + " theory depth --layers 3");
  CHECK(data_rows(r.out) == 4);

  {
    std::ofstream f(path);
    f << "layers = 7\nsigma_w2 = -1\n";
  }
  CHECK(run("--config " + path.string() + " theory depth").code == 2);
  std::filesystem::remove(path);
}

TEST_CASE("diagram") {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = run("diagram --alpha-range '1, 2, 2' --beta-range '0.02, 2, 2' --layers 60");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(r.code == 0);
  CHECK(secs < 1.0);
  CHECK(data_rows(r.out) == 4);
  CHECK(r.out.find("alpha_sa,beta,regime\n") != std::string::npos);
  CHECK(r.out.find(",entropy_collapse\n") != std::string::npos);

  r = run("diagram --alpha-range '1, 2, 2' --beta-range '0.02, 2, 2' --critical-alpha");
  CHECK(r.code == 0);
  CHECK(r.out.find("alpha_sa,beta,regime,critical_alpha\n") != std::string::npos);
}

TEST_CASE("sim depth") {
  const std::string base = "sim depth --d 64 --T 128 --layers 4 --seeds 2 --sequences 2";
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = run(base + " --seed 1");
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 10.0);
  CHECK(a.code == 0);
  CHECK(data_rows(a.out) == 5);
  CHECK(a.out.find("# max_deviation = ") != std::string::npos);
  CHECK(run(base + " --seed 1").out == a.out);
  CHECK(run(base + " --seed 1 --threads 1").out == a.out);
  CHECK(run(base + " --seed 2").out != a.out);
  CHECK(run(base + " --seed 1 --assert-max-dev 0").code == 1);
  CHECK(run(base + " --seed 1 --assert-max-dev 1").code == 0);
}

TEST_CASE("sim sa-phase and ipr") {
  auto r = run("sim sa-phase --d 32 --T 64 --beta-grid 0 --rho-grid 0.5 --seeds 2");
  CHECK(r.code == 0);
  CHECK(r.out.find("0,0.5,2,1,") != std::string::npos);
  CHECK(r.out.find(",0.015625,") != std::string::npos);  // ipr = 1/T

  r = run("sim ipr --d 32 --T 5000 --beta 0 --seeds 2");
  CHECK(r.code == 0);
  CHECK(r.out.find(",0.0002,") != std::string::npos);
  CHECK(run("sim ipr --d 32 --T 100").code == 2);
}

TEST_CASE("effective beta") {
  auto r = run("effective-beta --d 768 --heads 12 --T 512 --log-base 10");
  CHECK(r.code == 0);
  CHECK(r.out.find("64,0.0155") != std::string::npos);
  r = run("effective-beta --d 768 --heads 12 --T 512");
  CHECK(r.out.find("64,0.0102") != std::string::npos);
  CHECK(run("effective-beta --heads 0").code == 2);
  CHECK(run("effective-beta --heads 5").code == 2);
}

TEST_CASE("usage and runtime errors") {
  CHECK(run("").code == 2);
  CHECK(run("theory").code == 2);
  CHECK(run("--help").code == 0);
  CHECK(run("sim depth --help").code == 0);
  CHECK(run("theory depth --no-such-flag").code == 2);
  CHECK(run("theory depth --layers abc").code == 2);
  CHECK(run("theory depth --layers 2 --output /nonexistent/dir/out.csv").code == 3);
}

TEST_CASE("json output") {
  const auto r = run("--format json theory depth --layers 2");
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["rows"].size() == 3);
  CHECK(j["metadata"]["layers"] == "2");
  CHECK(j["columns"][1] == "rho_theory");
}
