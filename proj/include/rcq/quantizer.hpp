#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcq/numerics.hpp"

namespace rcq {

enum class LengthMode { Ideal, HuffmanInteger };

std::string to_string(LengthMode mode);
LengthMode parse_length_mode(const std::string& text);

// Cell probabilities below this are treated as empty.
inline constexpr double kEmptyCellMass = 1e-12;
// Cells squeezed to this width by the monotonicity projection are also empty.
inline constexpr double kCollapsedCellWidth = 1e-8;
// Ideal lengths must match -log2 of the final cell masses to this tolerance.
inline constexpr double kLengthConsistencyTol = 1e-10;

/// Scalar quantizer: symbol l (1-based) covers (u_l, u_{l+1}] and
/// reconstructs to s_l.  `boundaries` carries the ±inf sentinels.
struct QuantizerSpec {
  int bits = 1;
  double lambda = 0.0;
  LengthMode mode = LengthMode::Ideal;
  std::vector<double> levels;
  std::vector<double> boundaries;
  std::vector<double> lengths;
  std::vector<double> cell_probs;

  std::size_t cells() const { return levels.size(); }
  std::vector<double> interior_boundaries() const;
  // Throws std::invalid_argument describing the first broken invariant.
  void validate() const;
};

struct IterationRecord {
  double objective = 0.0;
  bool clamped = false;
  bool merged = false;
};

struct DesignReport {
  int iterations = 0;
  double mse = 0.0;
  double rate = 0.0;
  double objective = 0.0;
  int clamp_events = 0;
  int merge_events = 0;
  std::size_t final_cells = 0;
  bool converged = false;
  std::vector<IterationRecord> trace;
};

enum class InitMode {
  Quantile,   // equal-mass cells
  Companded,  // cells equal-mass under f^(1/3), the high-rate Lloyd-Max density
};

struct DesignOptions {
  LengthMode mode = LengthMode::Ideal;
  InitMode init = InitMode::Quantile;
  double tol = 1e-9;
  int max_iters = 500;
  // Cell count at initialization; 0 means 2^bits.
  std::size_t initial_cells = 0;
};

struct Design {
  QuantizerSpec spec;
  DesignReport report;
};

struct BoundaryUpdate {
  std::vector<double> boundaries;
  int clamp_events = 0;
};

double mse_of(const QuantizerSpec& spec, const Distribution& dist);
double rate_of(const QuantizerSpec& spec, const Distribution& dist);
std::vector<double> cell_probabilities(std::span<const double> boundaries, const Distribution& dist);

/// Centroid of every cell.  Empty cells (mass < kEmptyCellMass) must be
/// merged beforehand; a remaining empty cell gets its midpoint, or the
/// finite edge for a tail cell.
std::vector<double> lloyd_level_update(std::span<const double> boundaries, const Distribution& dist);

/// Rate-shifted midpoints u_l = (s_l + s_{l-1})/2 + (λ/2)(ℓ_l - ℓ_{l-1})/(s_l - s_{l-1}),
/// projected onto a strictly increasing sequence if they cross.
BoundaryUpdate rc_boundary_update(std::span<const double> levels, std::span<const double> lengths,
                                  double lambda);

/// Codeword lengths as a function of cell probabilities.  A single-cell
/// alphabet is charged one bit per symbol in both modes.
std::vector<double> length_update(std::span<const double> probs, LengthMode mode);

/// Merges cells with mass below kEmptyCellMass, or width below
/// kCollapsedCellWidth, into their lower-probability neighbour.  Returns the
/// number of merges.
int merge_empty_cells(std::vector<double>& boundaries, const Distribution& dist);

/// Alternating level / length / boundary optimization of MSE + λ·rate.
/// Converged means the relative change in J fell below opts.tol and the
/// lengths agree with the final cell masses.
Design design_quantizer(const Distribution& dist, int bits, double lambda, const DesignOptions& opts = {});

class InfeasibleRate : public std::runtime_error {
 public:
  InfeasibleRate(double target, double best)
      : std::runtime_error("target rate " + std::to_string(target) + " infeasible; best achieved rate " +
                           std::to_string(best)),
        best_rate_(best) {}
  double best_rate() const { return best_rate_; }

 private:
  double best_rate_;
};

struct TargetRateOptions {
  DesignOptions design{};
  double epsilon = 0.01;
  double lambda_max = 10.0;
  int max_doublings = 6;
  double lambda_tol = 1e-6;
  // Alternative initial cell counts tried below 2^bits when the rate jumps
  // across the target window.
  std::size_t max_cell_fallbacks = 16;
};

struct TargetRateDesign {
  QuantizerSpec spec;
  DesignReport report;
  double lambda = 0.0;
};

/// Design with rate in [target - ε, target], found by bisection on λ.
/// Returns the λ = 0 design when it already meets the target.  If the rate
/// jumps across the window, fewer initial cells are tried; failing that, the
/// feasible design closest to the target is returned.  Throws InfeasibleRate
/// when no λ reaches the target.
TargetRateDesign design_for_target_rate(const Distribution& dist, int bits, double target_rate,
                                        const TargetRateOptions& opts = {});

/// 1-based symbol l with u_l < z <= u_{l+1}.
std::uint32_t quantize(const QuantizerSpec& spec, double z);
double dequantize(const QuantizerSpec& spec, std::uint32_t symbol);

nlohmann::json to_json(const QuantizerSpec& spec);
QuantizerSpec quantizer_from_json(const nlohmann::json& doc);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace rcq
