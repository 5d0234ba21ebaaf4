#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "semiiv/ivtest.hpp"

namespace semiiv::cli {

inline constexpr int kExitAccept = 0;
inline constexpr int kExitReject = 1;
inline constexpr int kExitError = 2;

// Environment variable naming the default --config file.
inline constexpr const char* kConfigEnv = "SEMIIV_CONFIG";

enum class OutputFormat { Json, Text, Csv };

struct RunConfig {
  std::string input;
  std::vector<std::string> instruments;
  std::string treatment = "X";
  std::string outcome = "Y";
  TestConfig test;
  std::size_t bootstrap_replicates = 0;  // 0: no bootstrap
  std::uint64_t bootstrap_seed = 0;
  std::string output;  // empty: report goes to stdout
  OutputFormat format = OutputFormat::Json;
};

enum class DoubleVariant { Linear, General };

struct SimulateConfig {
  std::string model = "single";  // single | double
  double c = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string output;  // empty or "-": stdout
  bool with_truth = false;
};

struct ReproduceConfig {
  std::uint64_t seed = 0;
  std::string output_dir;
  std::size_t table1_replications = 10;
  std::size_t table2_replications = 20;
  std::vector<std::size_t> table1_sizes{200, 1000, 5000};
  std::vector<std::size_t> table2_sizes{50, 100, 200, 500};
  std::vector<double> table2_c{0.0, 0.2, 1.0};
  TestConfig test;  // table 1 always runs both additive engines
};

// Each command returns an exit code and never throws: diagnostics go to `err`.
int cmd_test_semi(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_test_double(const RunConfig& cfg, DoubleVariant variant, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_reproduce_tables(const ReproduceConfig& cfg, std::ostream& out, std::ostream& err);

// Parses argv (argv[0] is the program name) and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semiiv::cli
