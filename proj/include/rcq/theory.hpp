#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rcq/fl_sim.hpp"
#include "rcq/numerics.hpp"
#include "rcq/quantizer.hpp"

namespace rcq {

struct TheoryConstants {
  double L = 1.0;
  double rho = 1.0;
  std::vector<double> zeta;
  // Second-moment bound; carried for completeness, no bound uses it.
  double xi = 0.0;
  double Gamma = 0.0;
  std::vector<double> sigma;
  double gamma = 0.0;
  std::vector<double> theta_star;
  double init_dist2 = 0.0;
};

/// Closed-form constants of the quadratic consensus problem.  ζ_k is 1.1
/// times the distance from c_k to the farthest point of the hull spanned by
/// θ0 and the centers, which bounds ‖θ − c_k‖ along the trajectory.
TheoryConstants exact_constants_quadratic(const Problem& problem, const std::vector<double>& theta0,
                                          int local_iters);

/// ζ_k = margin · max local gradient norm seen by client k in a pre-run.
std::vector<double> estimate_zeta(const MetricsLog& prerun, std::size_t clients, double margin = 1.1);
/// ξ, the root of the largest per-round mean of squared local gradient norms.
double estimate_xi(const MetricsLog& prerun);

/// C = πe/(6K) Σ σ_k² 2^(−2R) + 6LΓ + 8(e−1)/K Σ ζ_k².  R = +inf drops the
/// quantization term.
double constant_C(const TheoryConstants& c, int local_iters, int clients, double rate);

/// L/(2(t+γ)) · max(4C/ρ², (γ+1)·init_dist2).
double theorem1_bound(const TheoryConstants& c, double init_dist2, int t, int local_iters, int clients,
                      double rate);

/// 4η²(e−1)² (1/K) Σ ζ_k².
double lemma1_rhs(double eta, int local_iters, std::span<const double> zeta, int clients);

/// πe/(6K) Σ σ_k² 2^(−2R).
double lemma2_rhs(std::span<const double> sigma, int clients, double rate);

struct HighRateResidual {
  double rate = 0.0;
  double mse = 0.0;
  double entropy = 0.0;
  // R − (h − ½ log2(12·MSE)).
  double residual = 0.0;
  // (1/12) Σ p_l Δ_l² over the finite cells, and the exact MSE on them.
  double panter_dite_mse = 0.0;
  double interior_mse = 0.0;
  double interior_mass = 0.0;
};

HighRateResidual highrate_residual(const QuantizerSpec& spec, const Distribution& dist);

struct TheoryRow {
  int t = 0;
  double gap = 0.0;
  double bound = 0.0;
  double drift = 0.0;
  double drift_bound = 0.0;
  double qerr = 0.0;
  double qerr_bound = 0.0;
};

struct VerifyOptions {
  // The quantization-error bound is enforced only at or above this bit width.
  int lemma2_min_bits = 6;
  // Rounds averaged for the quantization-error check (counted from round 1).
  int lemma2_window = 100;
};

struct TheoryReport {
  std::vector<TheoryRow> rows;
  bool theorem_checked = false;
  bool theorem_ok = true;
  bool drift_ok = true;
  bool lemma2_checked = false;
  bool lemma2_ok = true;
  double mean_qerr = 0.0;
  double mean_qerr_bound = 0.0;
  // max t·Δ_t over t ≥ γ.
  double max_t_gap = 0.0;
  std::vector<std::string> notices;
  std::vector<std::string> violations;

  bool ok() const { return theorem_ok && drift_ok && lemma2_ok; }
  void write_csv(std::ostream& out) const;
};

/// Rate R the theory uses for a compressor: the ideal-length rate of its
/// quantizer on N(0,1), or +inf without compression.
double compressor_rate(const Compressor& comp);

/// Evaluates the convergence, drift and quantization-error bounds against a
/// recorded trajectory.
TheoryReport verify_trajectory(const FlRunConfig& cfg, const MetricsLog& log, const TheoryConstants& constants,
                               const Compressor& comp, const VerifyOptions& opts = {});

}  // namespace rcq
