#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rcq/fl_sim.hpp"

namespace rcq {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNotConverged = 3;
inline constexpr int kExitRuntime = 4;

/// λ × b grid for the trade-off sweep.  Every grid point and baseline of one
/// repetition trains under the same seed, so rows are paired.
struct SweepSpec {
  std::vector<double> lambdas{0.02, 0.04, 0.06, 0.08, 0.10};
  std::vector<int> bits{3, 6};
  int repetitions = 1;

  // Non-empty, non-negative, ascending λ; bits in [1, 16]; repetitions >= 1.
  void validate() const;
};

struct SweepRow {
  std::string method;
  int bits = 0;
  double lambda = 0.0;
  int rep = 0;
  std::uint64_t seed = 0;
  // "ok" or the error that stopped this row.
  std::string status = "ok";
  double design_rate = 0.0;
  double final_loss = 0.0;
  double final_gap = 0.0;
  double final_acc = 0.0;
  std::uint64_t cum_bits = 0;
};

/// Runs the grid plus the LloydMax and UniformQsgd baselines at each b, with
/// up to `jobs` rows in flight.  Rows come back sorted by cumulative bits;
/// failed rows go last.
std::vector<SweepRow> run_sweep(const FlRunConfig& base, const SweepSpec& spec, int jobs = 1);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// Two clients with centers (0, 2) and (2, 0), θ0 = 0, the theorem step
/// size with L = ρ = 1, and no compression.
FlRunConfig quadratic_testbed(int rounds = 2000);

/// Entry point of the `rcq` tool; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace rcq
