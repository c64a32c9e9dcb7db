// End-to-end runs of the command-line tool: exit codes, output files, and
// JSON/CSV payload sanity.  The binary path comes in via SEMISENS_CLI_PATH.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "semisens/simstudy.hpp"

using namespace semisens;

namespace {

const std::string kCli = SEMISENS_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd =
      "\"" + kCli + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Writes a generated binary-confounder dataset as y,z,x1,x2 CSV.
std::string write_csv(int n, std::uint64_t seed, const std::string& path) {
  DgpSpec dgp;
  dgp.kind = DgpKind::binary_u;
  dgp.n = n;
  dgp.seed = seed;
  const GeneratedData g = generate(dgp);
  std::ofstream out(path);
  out << "y,z,x1,x2\n";
  for (int i = 0; i < n; ++i) {
    out << g.data.y(i) << ',' << g.data.z(i) << ',' << g.data.X(i, 1) << ','
        << g.data.X(i, 2) << '\n';
  }
  return path;
}

const std::string kData = write_csv(150, 51, "cli_data.csv");
const std::string kDataArgs =
    " --data cli_data.csv --outcome y --treatment z --covariates x1,x2";

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run("--help") == 0);
  CHECK(run("") == 1);                    // missing subcommand
  CHECK(run("frobnicate") == 1);          // unknown subcommand
  CHECK(run("fit" + kDataArgs) == 1);     // missing required --prior
  CHECK(run("fit --data absent.csv --outcome y --treatment z "
            "--prior bernoulli:0.2") == 1);
  CHECK(run("simulate --design nonsense --seed 1") == 1);
}

TEST_CASE("fit writes a JSON payload and the report goes to stdout") {
  const int rc = run("fit" + kDataArgs +
                     " --prior bernoulli:0.2 --delta 0.5 --gamma 0.5"
                     " --out cli_fit.json");
  REQUIRE(rc == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp("cli_fit.json"));
  CHECK(j.at("converged") == true);
  CHECK(j.at("family") == "bernoulli");
  CHECK(j.at("delta") == 0.5);
  CHECK(std::isfinite(j.at("beta_hat").get<double>()));
  CHECK(j.at("se").get<double>() > 0.0);
  std::remove("cli_fit.json");
}

TEST_CASE("numerical failures exit with code 2") {
  // A grid prior with a zero ridge level cannot be solved.
  CHECK(run("fit" + kDataArgs +
            " --prior grid:0:1:0.5 --alpha 0 --delta 1 --gamma 1") == 2);
}

TEST_CASE("sweep emits the CSV grid in input order") {
  const int rc = run("sweep" + kDataArgs +
                     " --prior bernoulli:0.2 --deltas 0,0.5 --gammas 0,0.5"
                     " --out cli_sweep.csv");
  REQUIRE(rc == 0);
  const std::string csv = slurp("cli_sweep.csv");
  CHECK(csv.rfind("delta,gamma,beta_hat", 0) == 0);
  int lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 5);  // header + 2x2 grid
  std::remove("cli_sweep.csv");
}

TEST_CASE("em subcommand fits the comparator") {
  const int rc = run("em" + kDataArgs +
                     " --delta 0.5 --gamma 0.5 --p-u 0.2 --out cli_em.json");
  REQUIRE(rc == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp("cli_em.json"));
  CHECK(j.at("method") == "em");
  CHECK(j.at("converged") == true);
  std::remove("cli_em.json");
}

TEST_CASE("pool combines fit JSON files by Rubin's rules") {
  REQUIRE(run("fit" + kDataArgs +
              " --prior bernoulli:0.2 --out cli_p1.json") == 0);
  REQUIRE(run("fit" + kDataArgs +
              " --prior bernoulli:0.3 --delta 0.5 --gamma 0.5"
              " --out cli_p2.json") == 0);
  const int rc =
      run("pool --inputs cli_p1.json,cli_p2.json --out cli_pool.csv");
  REQUIRE(rc == 0);
  const std::string csv = slurp("cli_pool.csv");
  CHECK(csv.rfind("beta_hat,se,ci_lo,ci_hi,level,within,between,m", 0) == 0);
  CHECK(csv.find(",2\n") != std::string::npos);  // m = 2
  std::remove("cli_p1.json");
  std::remove("cli_p2.json");
  std::remove("cli_pool.csv");
}

TEST_CASE("identify inverts a table from the command line") {
  const int rc = run("identify --cells 0.4,0.2,0.25,0.15"
                     " --delta 0.9 --gamma 0.7 --prior bernoulli:0.3"
                     " --out cli_id.json");
  REQUIRE(rc == 0);
  const nlohmann::json j = nlohmann::json::parse(slurp("cli_id.json"));
  CHECK(std::isfinite(j.at("beta_z").get<double>()));
  std::remove("cli_id.json");

  CHECK(run("identify --cells 0,0.5,0.25,0.25 --prior bernoulli:0.3") == 2);
}

TEST_CASE("simulate runs a tiny study end to end") {
  const int rc = run("simulate --design binary_u --n 150 --reps 4"
                     " --delta 1 --gamma 1 --seed 7 --out cli_sim.csv");
  REQUIRE(rc == 0);
  const std::string csv = slurp("cli_sim.csv");
  CHECK(csv.rfind("design,method,n,h,alpha", 0) == 0);
  CHECK(csv.find("binary_u,semi,150,") != std::string::npos);
  std::remove("cli_sim.csv");
}
