#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcq/huffman.hpp"
#include "rcq/quantizer.hpp"

namespace rcq {

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

enum class ProblemKind { QuadraticConsensus, LogisticBlobs, LinearRegression };

std::string to_string(ProblemKind kind);

/// Row-major feature matrix with one target per row.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;
  std::vector<double> y;

  const double* row(std::size_t i) const { return x.data() + i * cols; }
};

/// Client losses f_k and the global loss f = (1/K) Σ f_k.
///
/// QuadraticConsensus: f_k(θ) = ½‖θ − c_k‖².
/// LogisticBlobs: mean logistic loss with a trailing bias weight, labels in
///   {0, 1}, plus (l2/2)‖θ‖².
/// LinearRegression: mean ½(x·θ − y)² plus (l2/2)‖θ‖².
class Problem {
 public:
  static Problem quadratic(std::vector<std::vector<double>> centers);
  static Problem logistic(std::vector<Dataset> clients, Dataset test, double l2);
  static Problem linear_regression(std::vector<Dataset> clients, double l2);

  ProblemKind kind() const { return kind_; }
  std::size_t clients() const { return kind_ == ProblemKind::QuadraticConsensus ? centers_.size() : data_.size(); }
  std::size_t dim() const { return dim_; }
  double l2() const { return l2_; }
  const std::vector<std::vector<double>>& centers() const { return centers_; }
  const Dataset& client_data(std::size_t k) const { return data_.at(k); }
  std::size_t client_rows(std::size_t k) const;

  double client_loss(std::size_t k, const std::vector<double>& theta) const;
  double global_loss(const std::vector<double>& theta) const;

  // Gradient of f_k over the given rows; an empty row list means all rows.
  void client_gradient(std::size_t k, const std::vector<double>& theta, const std::vector<std::size_t>& rows,
                       std::vector<double>& out) const;

  /// Global minimizer when available in closed form (quadratic) or by a
  /// linear solve (linear regression).
  const std::optional<std::vector<double>>& optimum() const { return optimum_; }
  double optimal_loss() const { return optimal_loss_; }

  /// Fraction of held-out points classified correctly; NaN when the problem
  /// has no test set.
  double test_accuracy(const std::vector<double>& theta) const;

 private:
  Problem() = default;
  void finish();

  ProblemKind kind_ = ProblemKind::QuadraticConsensus;
  std::size_t dim_ = 0;
  double l2_ = 0.0;
  std::vector<std::vector<double>> centers_;
  std::vector<Dataset> data_;
  Dataset test_;
  std::optional<std::vector<double>> optimum_;
  double optimal_loss_ = std::numeric_limits<double>::quiet_NaN();
};

struct BlobsOptions {
  std::size_t clients = 10;
  std::size_t features = 32;
  std::size_t samples_per_client = 200;
  std::size_t test_samples = 2000;
  double beta = 0.5;
  double separation = 2.0;
  double l2 = 1e-3;
};

/// Two Gaussian classes with unit covariance and means ±(separation/2)·v
/// for a random unit vector v.  Class shares per client follow a symmetric
/// Dirichlet(beta) draw; every client keeps at least two points.
Problem make_logistic_blobs(const BlobsOptions& opts, std::uint64_t seed);

struct RegressionOptions {
  std::size_t clients = 4;
  std::size_t features = 8;
  std::size_t samples_per_client = 100;
  double noise = 0.1;
  // Per-client feature mean offset, which makes the clients heterogeneous.
  double shift = 1.0;
  double l2 = 0.0;
};

Problem make_linear_regression(const RegressionOptions& opts, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class ScheduleKind { Constant, Theorem };

struct Schedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double eta = 0.1;
  double rho = 1.0;
  double L = 1.0;
};

/// γ = max(8L/ρ, e) − 1.
double schedule_gamma(double L, double rho, int local_iters);
/// Step size for round t (0-based).
double learning_rate(const Schedule& s, int t, int local_iters);

enum class CompressorKind { None, RcFed, LloydMax, UniformQsgd };

std::string to_string(CompressorKind kind);

struct CompressorConfig {
  CompressorKind kind = CompressorKind::None;
  int bits = 3;
  double lambda = 0.0;
  LengthMode mode = LengthMode::Ideal;
  // Uniform baseline covers [-clip, clip].
  double clip = 2.5;
  // Replaces lambda with a bisection on the rate when set.
  std::optional<double> target_rate;
  int max_iters = 500;
  InitMode init = InitMode::Quantile;
};

struct ProblemConfig {
  ProblemKind kind = ProblemKind::QuadraticConsensus;
  std::vector<std::vector<double>> centers;
  BlobsOptions blobs;
  RegressionOptions regression;
};

struct FlRunConfig {
  int clients = 2;
  int rounds = 100;
  int local_iters = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  // Rows per local step; 0 uses the full local dataset.
  std::size_t batch_size = 0;
  double participation = 1.0;
  Schedule schedule;
  ProblemConfig problem;
  CompressorConfig compressor;
  // Defaults to the zero vector.
  std::vector<double> theta0;

  void validate() const;
};

FlRunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const FlRunConfig& cfg);
nlohmann::json to_json(const CompressorConfig& cfg);
FlRunConfig load_config(const std::string& path);

/// Builds the problem a config describes; generated datasets draw from a
/// stream derived from the seed.
Problem build_problem(const FlRunConfig& cfg);

// ---------------------------------------------------------------------------
// Compressors
// ---------------------------------------------------------------------------

/// Mid-rise uniform quantizer with 2^b cells on [-clip, clip]; the outer
/// cells extend to ±inf.  Lengths are Huffman lengths of the N(0,1) masses.
QuantizerSpec build_uniform_qsgd(int bits, double clip);

struct Compressor {
  CompressorKind kind = CompressorKind::None;
  std::optional<QuantizerSpec> spec;
  std::optional<HuffmanCodebook> book;
  std::optional<DesignReport> report;
};

/// Designs the quantizer on N(0,1) and builds the Huffman code from its cell
/// probabilities.  LloydMax is RcFed with λ = 0.
Compressor resolve_compressor(const CompressorConfig& cfg);

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct RoundRecord {
  int round = 0;
  double loss = 0.0;
  double gap = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t cum_bits = 0;
  double acc = std::numeric_limits<double>::quiet_NaN();
  // Quantities from the round that produced this model; empty or zero for
  // round 0.
  double eta = 0.0;
  std::vector<std::uint64_t> client_bits;
  std::vector<double> client_sigma;
  std::vector<double> client_grad_norm;
  // (1/K) Σ ‖θ_t − θ_{k,t}‖² after the local steps.
  double drift = 0.0;
  // ‖ḡ_t − (1/K) Σ g_{k,t}‖².
  double qerr = 0.0;
  std::vector<int> participants;
};

struct MetricsLog {
  std::vector<RoundRecord> records;
  std::vector<double> final_model;

  void write_csv(std::ostream& out) const;
  std::string csv() const;
};

/// Single-client result of one round.
struct ClientUpdate {
  std::vector<double> gradient;
  std::vector<double> reconstructed;
  std::uint64_t bits = 0;
  double sigma = 0.0;
  double drift = 0.0;
  double max_grad_norm = 0.0;
};

/// Runs e local steps from θ and returns ∇f_k(θ) for e = 1, or the
/// effective gradient (θ − θ_k)/η for e > 1.  `drift` receives ‖θ − θ_k‖²
/// and `max_grad_norm` the largest local gradient norm.
std::vector<double> local_update(const Problem& problem, std::size_t k, const std::vector<double>& theta,
                                 int local_iters, double eta, std::size_t batch_size, std::mt19937_64& rng,
                                 double* drift = nullptr, double* max_grad_norm = nullptr);

class Simulation {
 public:
  Simulation(FlRunConfig cfg, Problem problem, Compressor compressor);
  explicit Simulation(const FlRunConfig& cfg);

  const FlRunConfig& config() const { return cfg_; }
  const Problem& problem() const { return problem_; }
  const Compressor& compressor() const { return compressor_; }
  const std::vector<double>& theta() const { return theta_; }
  int round() const { return round_; }

  RoundRecord initial_record() const;
  /// One broadcast / local update / compress / aggregate step.
  RoundRecord run_round();
  MetricsLog run();

 private:
  ClientUpdate client_round(std::size_t k, double eta);
  std::vector<int> sample_participants();
  void fill_metrics(RoundRecord& rec) const;

  FlRunConfig cfg_;
  Problem problem_;
  Compressor compressor_;
  std::vector<double> theta_;
  std::vector<std::mt19937_64> client_rng_;
  std::mt19937_64 participation_rng_;
  int round_ = 0;
  std::uint64_t cum_bits_ = 0;
};

MetricsLog run_training(const FlRunConfig& cfg);

/// Derives an independent generator from (seed, stream tag, index).
std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t index);

}  // namespace rcq
