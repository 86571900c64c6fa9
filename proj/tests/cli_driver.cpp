// End-to-end checks of the fdsim binary. The binary path arrives as argv[1]
// (wired by ctest); each case runs subcommands against a scratch directory.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string g_fdsim;
fs::path g_work;

struct Proc {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

Proc run_cli(const std::string& args) {
  const fs::path out = g_work / "stdout.txt";
  const fs::path err = g_work / "stderr.txt";
  const std::string cmd = g_fdsim + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Proc p;
  p.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  p.out = slurp(out);
  p.err = slurp(err);
  return p;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  os << content;
}

const char* kSmokeConfig = R"({
  "seed": 5,
  "rounds": 3,
  "clients": {"count": 4, "per_round": 2},
  "data": {"n_classes": 3, "dim": 6, "spread": 0.7, "n_private": 240,
           "n_public": 120, "n_test": 150},
  "sampling": {"strategy": "mixed", "n_logit": 40},
  "training": {"local_epochs": 1, "local_lr": 0.1, "local_batch": 16,
               "distill_epochs": 1, "distill_lr": 0.2, "distill_batch": 32,
               "upload_temperature": 1.0}
})";

}  // namespace

TEST_CASE("run writes a complete run directory with K rows") {
  write_file(g_work / "cfg.json", kSmokeConfig);
  const Proc p = run_cli("run " + (g_work / "cfg.json").string() + " --out " +
                         (g_work / "r1").string());
  CHECK(p.exit_code == 0);
  REQUIRE(fs::exists(g_work / "r1/metrics.csv"));
  CHECK(fs::exists(g_work / "r1/config.json"));
  CHECK(fs::exists(g_work / "r1/summary.json"));
  CHECK(fs::exists(g_work / "r1/manifest.json"));

  const std::string csv = slurp(g_work / "r1/metrics.csv");
  CHECK(csv.starts_with("round,server_acc,mean_client_acc,uplink_scalars,"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + 3 rounds
}

TEST_CASE("rerun with the same config is byte-identical") {
  write_file(g_work / "cfg.json", kSmokeConfig);
  const std::string base = "run " + (g_work / "cfg.json").string() + " --out ";
  CHECK(run_cli(base + (g_work / "r2").string()).exit_code == 0);
  CHECK(run_cli(base + (g_work / "r3").string()).exit_code == 0);
  CHECK(slurp(g_work / "r2/metrics.csv") == slurp(g_work / "r3/metrics.csv"));
  CHECK(slurp(g_work / "r2/config.json") == slurp(g_work / "r3/config.json"));

  // A seed override changes the numbers.
  CHECK(run_cli(base + (g_work / "r4").string() + " --seed 77").exit_code == 0);
  CHECK(slurp(g_work / "r4/metrics.csv") != slurp(g_work / "r2/metrics.csv"));
}

TEST_CASE("unknown strategy tag names the tag and the allowed set") {
  write_file(g_work / "bad.json", R"({"sampling": {"strategy": "entropy_desc"}})");
  const Proc p = run_cli("run " + (g_work / "bad.json").string() + " --out " +
                         (g_work / "bad_out").string());
  CHECK(p.exit_code != 0);
  CHECK(p.err.find("entropy_desc") != std::string::npos);
  CHECK(p.err.find("none, random, low_entropy, mixed") != std::string::npos);
}

TEST_CASE("validate-config prints a stable canonical form") {
  write_file(g_work / "cfg.json", kSmokeConfig);
  const Proc a = run_cli("validate-config " + (g_work / "cfg.json").string());
  CHECK(a.exit_code == 0);
  write_file(g_work / "canon.json", a.out);
  const Proc b = run_cli("validate-config " + (g_work / "canon.json").string());
  CHECK(b.exit_code == 0);
  CHECK(b.out == a.out);
}

TEST_CASE("sweep with no axes equals a plain run") {
  write_file(g_work / "cfg.json", kSmokeConfig);
  CHECK(run_cli("run " + (g_work / "cfg.json").string() + " --out " +
                (g_work / "plain").string()).exit_code == 0);
  CHECK(run_cli("sweep " + (g_work / "cfg.json").string() + " --out " +
                (g_work / "sw0").string()).exit_code == 0);
  CHECK(slurp(g_work / "sw0/single/metrics.csv") == slurp(g_work / "plain/metrics.csv"));
}

TEST_CASE("sweep crosses axes and writes a keyed summary") {
  write_file(g_work / "cfg.json", kSmokeConfig);
  const Proc p = run_cli("sweep " + (g_work / "cfg.json").string() +
                         " --axis partition.alpha=100,0.1 --axis sampling.strategy=none,random" +
                         " --jobs 2 --out " + (g_work / "sw1").string());
  CHECK(p.exit_code == 0);
  int cells = 0;
  for (const auto& entry : fs::directory_iterator(g_work / "sw1")) {
    if (entry.is_directory()) ++cells;
  }
  CHECK(cells == 4);
  const std::string summary = slurp(g_work / "sw1/summary.csv");
  CHECK(summary.starts_with("partition.alpha,sampling.strategy,final_server_acc"));
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 5);

  const Proc bad = run_cli("sweep " + (g_work / "cfg.json").string() +
                           " --axis nota.field=1,2 --out " + (g_work / "sw2").string());
  CHECK(bad.exit_code != 0);
  CHECK(bad.err.find("nota.field") != std::string::npos);
}

TEST_CASE("theory emits one row per cell and isolates degenerate cells") {
  const Proc p = run_cli("theory --alpha 0.6 --sigma 1 --gamma 0,50 --ubar 1 --p 300"
                         " --trials 12 --check --tolerance 0.25 --out " +
                         (g_work / "th").string());
  CHECK(p.exit_code == 0);  // degenerate cell reported, not fatal
  CHECK(p.err.find("degenerate") != std::string::npos);
  const std::string csv = slurp(g_work / "th/theory.csv");
  CHECK(csv.starts_with("alpha,sigma,Gamma,u_bar,closed_form,mc_mean,mc_se,p,trials"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 cells
  CHECK(csv.find("nan") != std::string::npos);

  // An absurd tolerance makes --check fail with a nonzero exit.
  const Proc strict = run_cli("theory --alpha 0.6 --sigma 1 --gamma 0 --ubar 1 --p 300"
                              " --trials 12 --check --tolerance 0.0001 --out " +
                              (g_work / "th2").string());
  CHECK(strict.exit_code != 0);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: test_cli <path-to-fdsim>\n");
    return 2;
  }
  g_fdsim = argv[1];
  g_work = fs::temp_directory_path() / "fd_cli_test";
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  doctest::Context ctx;
  const int rc = ctx.run();
  fs::remove_all(g_work);
  return rc;
}
