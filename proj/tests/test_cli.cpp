#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semiiv/cli.hpp"
#include "semiiv/dataset.hpp"
#include "semiiv/simgen.hpp"

using namespace semiiv;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Scratch directory removed at exit.
struct Scratch {
  fs::path dir;
  Scratch() {
    dir = fs::temp_directory_path() / ("semiiv_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  [[nodiscard]] std::string path(const std::string& name) const { return (dir / name).string(); }
};

Scratch& scratch() {
  static Scratch s;
  return s;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string write(const std::string& name, const Dataset& d) {
  const auto p = scratch().path(name);
  write_csv_file(p, d);
  return p;
}

std::string write_text(const std::string& name, const std::string& text) {
  const auto p = scratch().path(name);
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

}  // namespace

TEST_CASE("test-semi exit codes") {
  const auto reject = write("model2.csv", gen_single_instrument(1.0, 1000, 1).observed);
  CHECK(run({"test-semi", "-i", reject}).code == cli::kExitReject);

  const auto missing = write("missing.csv", gen_single_instrument(0.0, 100, 2).observed);
  const auto r = run({"test-semi", "-i", missing, "--treatment", "W"});
  CHECK(r.code == cli::kExitError);
  CHECK(r.err.find("'W'") != std::string::npos);

  const auto bad = write_text("bad.csv", "Z,X,Y\n1,2,3\n4,five,6\n");
  const auto b = run({"test-semi", "-i", bad});
  CHECK(b.code == cli::kExitError);
  CHECK(b.err.find("row 3") != std::string::npos);
  CHECK(b.err.find("'X'") != std::string::npos);

  CHECK(run({"test-semi", "-i", scratch().path("nope.csv")}).code == cli::kExitError);
  CHECK(run({"test-semi", "-i", missing, "--span", "0"}).code == cli::kExitError);
  CHECK(run({"test-semi", "-i", missing, "--kernel", "gauss"}).code == cli::kExitError);
  CHECK(run({"test-semi", "-i", missing, "--format", "xml"}).code == cli::kExitError);
  CHECK(run({"test-semi"}).code == cli::kExitError);
  CHECK(run({"no-such-command"}).code == cli::kExitError);
  CHECK(run({}).code == cli::kExitError);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("test-semi accepts the instrumental model in most seeds") {
  int accepted = 0;
  for (int seed = 0; seed < 10; ++seed) {
    const auto p = write("model1_" + std::to_string(seed) + ".csv", gen_single_instrument(0.0, 2000, 50 + seed).observed);
    const auto r = run({"test-semi", "-i", p, "--engine", "direct-ls"});
    REQUIRE(r.code != cli::kExitError);
    accepted += r.code == cli::kExitAccept;
  }
  CHECK(accepted >= 8);
}

TEST_CASE("test-double exit codes") {
  const auto ok = write("d0.csv", gen_double_instrument(0.0, 500, 3).observed);
  CHECK(run({"test-double", "-i", ok}).code == cli::kExitAccept);
  const auto bad = write("d1.csv", gen_double_instrument(1.0, 50, 4).observed);
  CHECK(run({"test-double", "-i", bad}).code == cli::kExitReject);
  CHECK(run({"test-double", "-i", ok, "--instruments", "Z1,Z1"}).code == cli::kExitError);
  CHECK(run({"test-double", "-i", ok, "--variant", "quadratic"}).code == cli::kExitError);

  const auto general = run({"test-double", "-i", ok, "--variant", "general", "--combine", "marginal"});
  CHECK(general.code != cli::kExitError);
  const auto j = nlohmann::ordered_json::parse(general.out);
  CHECK(j["report"] == "double_instrument");
  CHECK(j["config"]["combine"] == "marginal");
}

TEST_CASE("reports round-trip as JSON") {
  const auto p = write("rt.csv", gen_single_instrument(0.0, 400, 5).observed);
  for (const auto& extra : std::vector<std::vector<std::string>>{{}, {"--bootstrap", "100", "--bootstrap-seed", "3"}}) {
    std::vector<std::string> args{"test-semi", "-i", p};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run(args);
    REQUIRE(r.code != cli::kExitError);
    const auto j = nlohmann::ordered_json::parse(r.out);
    CHECK(j["schema_version"] == 1);
    CHECK(j["report"] == "semi_instrument");
    CHECK(j.dump(2) + "\n" == r.out);
    CHECK(j["measurability"]["bootstrap"].is_null() == extra.empty());
    CHECK((j["decision"] == "accept") == (r.code == cli::kExitAccept));
  }
  const auto d = write("rt2.csv", gen_double_instrument(0.2, 200, 6).observed);
  const auto r = run({"test-double", "-i", d});
  const auto j = nlohmann::ordered_json::parse(r.out);
  CHECK(j.dump(2) + "\n" == r.out);
  CHECK(j["report"] == "linear_double_instrument");
}

TEST_CASE("exact fits report a null BIC") {
  auto g = gen_single_instrument(0.0, 200, 7).observed;
  Dataset d;
  d.add_column("Z", {g.column("Z").begin(), g.column("Z").end()});
  d.add_column("X", {g.column("X").begin(), g.column("X").end()});
  std::vector<double> y(d.column("X").begin(), d.column("X").end());
  for (double& v : y) v = 3.0 * v - 1.0;
  d.add_column("Y", y);
  const auto r = run({"test-semi", "-i", write("exact.csv", d)});
  REQUIRE(r.code != cli::kExitError);
  const auto j = nlohmann::ordered_json::parse(r.out);
  CHECK(j["additivity"]["additive"]["bic"].is_null());
  CHECK(j["additivity"]["additive"]["exact_fit"] == true);
}

TEST_CASE("text and csv formats, and report files") {
  const auto p = write("fmt.csv", gen_single_instrument(1.0, 300, 8).observed);
  const auto text = run({"test-semi", "-i", p, "--format", "text"});
  CHECK(text.out.find("additivity:") != std::string::npos);
  const auto csv = run({"test-semi", "-i", p, "--format", "csv"});
  CHECK(csv.out.rfind("field,value\n", 0) == 0);
  CHECK(csv.out.find("\nadditivity.decision,") != std::string::npos);

  const auto report = scratch().path("report.json");
  const auto f = run({"test-semi", "-i", p, "-o", report});
  CHECK(f.code == text.code);
  CHECK(f.out == text.out);
  CHECK(nlohmann::ordered_json::parse(slurp(report))["schema_version"] == 1);
  CHECK(run({"test-semi", "-i", p, "-o", scratch().path("no/such/dir/r.json")}).code == cli::kExitError);
}

TEST_CASE("simulate") {
  const auto a = run({"simulate", "--model", "single", "-c", "1", "-n", "50", "--seed", "9"});
  const auto b = run({"simulate", "--model", "single", "-c", "1", "-n", "50", "--seed", "9"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("Z,X,Y\n", 0) == 0);
  CHECK(run({"simulate", "-n", "50", "--seed", "10"}).out != a.out);

  const auto dbl = run({"simulate", "--model", "double", "-n", "5", "--seed", "1", "--with-truth"});
  CHECK(dbl.out.rfind("Z1,Z2,X,Y,truth.T,truth.eps_x,truth.eps_y\n", 0) == 0);

  const auto file = scratch().path("sim.csv");
  CHECK(run({"simulate", "-n", "50", "--seed", "9", "-c", "1", "-o", file}).code == 0);
  CHECK(slurp(file) == a.out);
  std::ifstream in(file);
  const auto d = read_csv(in);
  CHECK(d.rows() == 50);

  CHECK(run({"simulate", "-n", "50", "--seed", "9", "-o", scratch().path("no/such/dir/x.csv")}).code ==
        cli::kExitError);
  CHECK(run({"simulate", "-n", "50"}).code == cli::kExitError);
  CHECK(run({"simulate", "-n", "0", "--seed", "1"}).code == cli::kExitError);
  CHECK(run({"simulate", "--model", "triple", "-n", "5", "--seed", "1"}).code == cli::kExitError);
}

TEST_CASE("simulated moments survive the CSV round trip") {
  const auto r = run({"simulate", "-n", "100000", "--seed", "11"});
  std::istringstream in(r.out);
  const auto d = read_csv(in);
  double sum = 0.0;
  for (double x : d.column("X")) sum += x;
  CHECK(std::abs(sum / 100000.0 - 28.0 / 3.0) < 0.1);
}

TEST_CASE("defaults come from the config file named in the environment") {
  const auto p = write("cfg.csv", gen_single_instrument(0.0, 300, 12).observed);
  const auto cfg = write_text("defaults.ini", "[test-semi]\nspan=0.01\n");
  ::setenv(cli::kConfigEnv, cfg.c_str(), 1);
  const auto bad = run({"test-semi", "-i", p});
  ::setenv(cli::kConfigEnv, "", 1);
  CHECK(bad.code == cli::kExitError);  // the span from the file is used, and is too small
  CHECK(bad.err.find("span") != std::string::npos);
  CHECK(run({"test-semi", "-i", p}).code != cli::kExitError);
  // an explicit --config wins over the environment
  CHECK(run({"test-semi", "-i", p, "--config", cfg}).code == cli::kExitError);
}

TEST_CASE("reproduce-tables is deterministic") {
  const auto out1 = scratch().path("tables1"), out2 = scratch().path("tables2");
  const std::vector<std::string> common{"--seed",          "5",    "--table1-replications", "1",
                                        "--table2-replications", "2", "--table1-sizes", "200",
                                        "--table2-sizes", "50,100"};
  auto a = common, b = common;
  a.insert(a.begin(), {"reproduce-tables", "-o", out1});
  b.insert(b.begin(), {"reproduce-tables", "-o", out2});
  REQUIRE(run(a).code == 0);
  REQUIRE(run(b).code == 0);
  for (const char* name : {"table1.csv", "table1_runs.csv", "table2.csv", "table2_runs.csv"}) {
    const auto x = slurp(out1 + "/" + name);
    CHECK(!x.empty());
    CHECK(x == slurp(out2 + "/" + name));
    CHECK(x.rfind("# absolute BIC values are implementation-dependent", 0) == 0);
  }
  // header + 3 c values x 2 sizes
  const auto t2 = slurp(out1 + "/table2.csv");
  CHECK(std::count(t2.begin(), t2.end(), '\n') == 2 + 6);
  CHECK(run({"reproduce-tables", "-o", out1}).code == cli::kExitError);
}
