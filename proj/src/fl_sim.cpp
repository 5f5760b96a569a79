#include "rcq/fl_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rcq/gradient_codec.hpp"

namespace rcq {

namespace {

constexpr std::uint64_t kClientStream = 1;
constexpr std::uint64_t kParticipationStream = 2;
constexpr std::uint64_t kDataStream = 3;
constexpr std::uint64_t kTestStream = 4;
// Uncompressed entries are charged as 32-bit floats.
constexpr std::uint64_t kFullPrecisionBits = 32;

double dot(const double* a, const std::vector<double>& b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Solves A x = b in place by Gaussian elimination with partial pivoting.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (std::abs(a[piv * n + c]) < 1e-300) throw std::runtime_error("singular normal equations");
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[c * n + j], a[piv * n + j]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      if (f == 0.0) continue;
      for (std::size_t j = c; j < n; ++j) a[r * n + j] -= f * a[c * n + j];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t j = i + 1; j < n; ++j) acc -= a[i * n + j] * x[j];
    x[i] = acc / a[i * n + i];
  }
  return x;
}

std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  return format_double(v);
}

}  // namespace

std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::QuadraticConsensus: return "quadratic";
    case ProblemKind::LogisticBlobs: return "logistic_blobs";
    case ProblemKind::LinearRegression: return "linear_regression";
  }
  return "unknown";
}

std::string to_string(CompressorKind kind) {
  switch (kind) {
    case CompressorKind::None: return "none";
    case CompressorKind::RcFed: return "rcfed";
    case CompressorKind::LloydMax: return "lloyd_max";
    case CompressorKind::UniformQsgd: return "uniform_qsgd";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Problem
// ---------------------------------------------------------------------------

Problem Problem::quadratic(std::vector<std::vector<double>> centers) {
  if (centers.empty()) throw std::invalid_argument("quadratic problem needs at least one center");
  const std::size_t d = centers.front().size();
  if (d == 0) throw std::invalid_argument("quadratic centers must be non-empty vectors");
  for (const auto& c : centers)
    if (c.size() != d) throw std::invalid_argument("quadratic centers must share one dimension");
  Problem p;
  p.kind_ = ProblemKind::QuadraticConsensus;
  p.dim_ = d;
  p.centers_ = std::move(centers);
  p.finish();
  return p;
}

Problem Problem::logistic(std::vector<Dataset> clients, Dataset test, double l2) {
  if (clients.empty()) throw std::invalid_argument("logistic problem needs at least one client");
  Problem p;
  p.kind_ = ProblemKind::LogisticBlobs;
  p.dim_ = clients.front().cols + 1;
  p.data_ = std::move(clients);
  p.test_ = std::move(test);
  p.l2_ = l2;
  p.finish();
  return p;
}

Problem Problem::linear_regression(std::vector<Dataset> clients, double l2) {
  if (clients.empty()) throw std::invalid_argument("regression problem needs at least one client");
  Problem p;
  p.kind_ = ProblemKind::LinearRegression;
  p.dim_ = clients.front().cols;
  p.data_ = std::move(clients);
  p.l2_ = l2;
  p.finish();
  return p;
}

void Problem::finish() {
  for (const auto& ds : data_) {
    if (ds.rows == 0) throw std::invalid_argument("every client needs at least one row");
    if (ds.cols != data_.front().cols) throw std::invalid_argument("clients must share a feature count");
  }
  if (kind_ == ProblemKind::QuadraticConsensus) {
    std::vector<double> mean(dim_, 0.0);
    for (const auto& c : centers_)
      for (std::size_t i = 0; i < dim_; ++i) mean[i] += c[i];
    for (double& m : mean) m /= static_cast<double>(centers_.size());
    optimum_ = mean;
  } else if (kind_ == ProblemKind::LinearRegression) {
    const std::size_t n = dim_;
    std::vector<double> h(n * n, 0.0), rhs(n, 0.0);
    const double inv_k = 1.0 / static_cast<double>(data_.size());
    for (const auto& ds : data_) {
      const double w = inv_k / static_cast<double>(ds.rows);
      for (std::size_t r = 0; r < ds.rows; ++r) {
        const double* x = ds.row(r);
        for (std::size_t i = 0; i < n; ++i) {
          rhs[i] += w * x[i] * ds.y[r];
          for (std::size_t j = 0; j < n; ++j) h[i * n + j] += w * x[i] * x[j];
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) h[i * n + i] += l2_;
    optimum_ = solve_linear(std::move(h), std::move(rhs));
  }
  if (optimum_) optimal_loss_ = global_loss(*optimum_);
}

std::size_t Problem::client_rows(std::size_t k) const {
  return kind_ == ProblemKind::QuadraticConsensus ? 0 : data_.at(k).rows;
}

double Problem::client_loss(std::size_t k, const std::vector<double>& theta) const {
  if (kind_ == ProblemKind::QuadraticConsensus) {
    const auto& c = centers_.at(k);
    double acc = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) acc += (theta[i] - c[i]) * (theta[i] - c[i]);
    return 0.5 * acc;
  }
  const Dataset& ds = data_.at(k);
  double acc = 0.0;
  for (std::size_t r = 0; r < ds.rows; ++r) {
    const double* x = ds.row(r);
    if (kind_ == ProblemKind::LogisticBlobs) {
      const double z = dot(x, theta, ds.cols) + theta[ds.cols];
      acc += softplus(z) - ds.y[r] * z;
    } else {
      const double res = dot(x, theta, ds.cols) - ds.y[r];
      acc += 0.5 * res * res;
    }
  }
  return acc / static_cast<double>(ds.rows) + 0.5 * l2_ * squared_norm(theta);
}

double Problem::global_loss(const std::vector<double>& theta) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < clients(); ++k) acc += client_loss(k, theta);
  return acc / static_cast<double>(clients());
}

void Problem::client_gradient(std::size_t k, const std::vector<double>& theta,
                              const std::vector<std::size_t>& rows, std::vector<double>& out) const {
  out.assign(dim_, 0.0);
  if (kind_ == ProblemKind::QuadraticConsensus) {
    const auto& c = centers_.at(k);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = theta[i] - c[i];
    return;
  }
  const Dataset& ds = data_.at(k);
  const std::size_t count = rows.empty() ? ds.rows : rows.size();
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t r = rows.empty() ? j : rows[j];
    const double* x = ds.row(r);
    double coef;
    if (kind_ == ProblemKind::LogisticBlobs) {
      coef = sigmoid(dot(x, theta, ds.cols) + theta[ds.cols]) - ds.y[r];
      out[ds.cols] += coef;
    } else {
      coef = dot(x, theta, ds.cols) - ds.y[r];
    }
    for (std::size_t i = 0; i < ds.cols; ++i) out[i] += coef * x[i];
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < dim_; ++i) out[i] = out[i] * inv + l2_ * theta[i];
}

double Problem::test_accuracy(const std::vector<double>& theta) const {
  if (kind_ != ProblemKind::LogisticBlobs || test_.rows == 0) return std::numeric_limits<double>::quiet_NaN();
  std::size_t hits = 0;
  for (std::size_t r = 0; r < test_.rows; ++r) {
    const double z = dot(test_.row(r), theta, test_.cols) + theta[test_.cols];
    hits += ((z > 0.0) == (test_.y[r] > 0.5)) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(test_.rows);
}

Problem make_logistic_blobs(const BlobsOptions& opts, std::uint64_t seed) {
  if (opts.clients == 0 || opts.features == 0 || opts.samples_per_client < 2)
    throw std::invalid_argument("logistic blobs need clients, features and at least two samples per client");
  if (!(opts.beta > 0.0)) throw std::invalid_argument("Dirichlet beta must be positive");
  auto rng = derive_rng(seed, kDataStream, 0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> dir(opts.features);
  for (double& v : dir) v = normal(rng);
  const double norm = std::sqrt(squared_norm(dir));
  for (double& v : dir) v *= 0.5 * opts.separation / norm;

  const std::size_t k_count = opts.clients;
  const std::size_t total = k_count * opts.samples_per_client;
  const std::size_t per_class[2] = {total / 2, total - total / 2};

  // counts[k][c]: points of class c held by client k.
  std::vector<std::array<std::size_t, 2>> counts(k_count, {0, 0});
  std::gamma_distribution<double> gamma(opts.beta, 1.0);
  for (int c = 0; c < 2; ++c) {
    std::vector<double> share(k_count);
    for (double& s : share) s = gamma(rng);
    const double sum = std::accumulate(share.begin(), share.end(), 0.0);
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      const double want = share[k] / sum * static_cast<double>(per_class[c]);
      counts[k][c] = static_cast<std::size_t>(std::floor(want));
      assigned += counts[k][c];
      frac.emplace_back(-(want - std::floor(want)), k);
    }
    std::sort(frac.begin(), frac.end());
    for (std::size_t i = 0; assigned < per_class[c]; ++i, ++assigned) ++counts[frac[i % k_count].second][c];
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    while (counts[k][0] + counts[k][1] < 2) {
      std::size_t donor = 0;
      for (std::size_t j = 1; j < k_count; ++j)
        if (counts[j][0] + counts[j][1] > counts[donor][0] + counts[donor][1]) donor = j;
      const int c = counts[donor][0] >= counts[donor][1] ? 0 : 1;
      --counts[donor][c];
      ++counts[k][c];
    }
  }

  auto draw = [&](std::mt19937_64& gen, Dataset& ds, int label) {
    const double sign = label == 1 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < opts.features; ++i) ds.x.push_back(sign * dir[i] + normal(gen));
    ds.y.push_back(static_cast<double>(label));
    ++ds.rows;
  };

  std::vector<Dataset> clients(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    clients[k].cols = opts.features;
    for (int c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < counts[k][c]; ++i) draw(rng, clients[k], c);
  }
  Dataset test;
  test.cols = opts.features;
  auto test_rng = derive_rng(seed, kTestStream, 0);
  for (std::size_t i = 0; i < opts.test_samples; ++i) draw(test_rng, test, static_cast<int>(i % 2));
  return Problem::logistic(std::move(clients), std::move(test), opts.l2);
}

Problem make_linear_regression(const RegressionOptions& opts, std::uint64_t seed) {
  if (opts.clients == 0 || opts.features == 0 || opts.samples_per_client == 0)
    throw std::invalid_argument("linear regression needs clients, features and samples");
  auto rng = derive_rng(seed, kDataStream, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> truth(opts.features);
  for (double& v : truth) v = normal(rng);
  std::vector<Dataset> clients(opts.clients);
  for (auto& ds : clients) {
    ds.cols = opts.features;
    std::vector<double> offset(opts.features);
    for (double& v : offset) v = opts.shift * normal(rng);
    for (std::size_t r = 0; r < opts.samples_per_client; ++r) {
      double y = 0.0;
      for (std::size_t i = 0; i < opts.features; ++i) {
        const double x = offset[i] + normal(rng);
        ds.x.push_back(x);
        y += x * truth[i];
      }
      ds.y.push_back(y + opts.noise * normal(rng));
      ++ds.rows;
    }
  }
  return Problem::linear_regression(std::move(clients), opts.l2);
}

// ---------------------------------------------------------------------------
// Schedules and compressors
// ---------------------------------------------------------------------------

double schedule_gamma(double L, double rho, int local_iters) {
  return std::max(8.0 * L / rho, static_cast<double>(local_iters)) - 1.0;
}

double learning_rate(const Schedule& s, int t, int local_iters) {
  if (s.kind == ScheduleKind::Constant) return s.eta;
  return 2.0 / (s.rho * (static_cast<double>(t) + schedule_gamma(s.L, s.rho, local_iters)));
}

QuantizerSpec build_uniform_qsgd(int bits, double clip) {
  if (bits < 1 || bits > 16) throw std::invalid_argument("build_uniform_qsgd: bits must lie in [1, 16]");
  if (!(clip > 0.0) || !std::isfinite(clip)) throw std::invalid_argument("build_uniform_qsgd: clip must be positive");
  const std::size_t n = std::size_t{1} << bits;
  const double width = 2.0 * clip / static_cast<double>(n);
  QuantizerSpec spec;
  spec.bits = bits;
  spec.lambda = 0.0;
  spec.mode = LengthMode::HuffmanInteger;
  spec.boundaries.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 1; i < n; ++i) spec.boundaries.push_back(-clip + width * static_cast<double>(i));
  spec.boundaries.push_back(std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) spec.levels.push_back(-clip + width * (static_cast<double>(i) + 0.5));
  spec.cell_probs = cell_probabilities(spec.boundaries, Distribution::standard_normal());
  const auto book = build_codebook(spec.cell_probs);
  for (int len : book.lengths()) spec.lengths.push_back(static_cast<double>(len));
  return spec;
}

Compressor resolve_compressor(const CompressorConfig& cfg) {
  Compressor out;
  out.kind = cfg.kind;
  if (cfg.kind == CompressorKind::None) return out;
  if (cfg.kind == CompressorKind::UniformQsgd) {
    out.spec = build_uniform_qsgd(cfg.bits, cfg.clip);
  } else {
    const Distribution dist = Distribution::standard_normal();
    DesignOptions opts;
    opts.mode = cfg.mode;
    opts.init = cfg.init;
    opts.max_iters = cfg.max_iters;
    if (cfg.kind == CompressorKind::RcFed && cfg.target_rate) {
      TargetRateOptions t;
      t.design = opts;
      TargetRateDesign d = design_for_target_rate(dist, cfg.bits, *cfg.target_rate, t);
      out.spec = std::move(d.spec);
      out.report = std::move(d.report);
    } else {
      const double lambda = cfg.kind == CompressorKind::LloydMax ? 0.0 : cfg.lambda;
      Design d = design_quantizer(dist, cfg.bits, lambda, opts);
      out.spec = std::move(d.spec);
      out.report = std::move(d.report);
    }
  }
  if (out.spec->mode == LengthMode::HuffmanInteger) {
    std::vector<int> lengths;
    for (double len : out.spec->lengths) lengths.push_back(static_cast<int>(std::lround(len)));
    out.book = HuffmanCodebook::from_lengths(std::move(lengths));
  } else {
    out.book = build_codebook(out.spec->cell_probs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

std::vector<double> local_update(const Problem& problem, std::size_t k, const std::vector<double>& theta,
                                 int local_iters, double eta, std::size_t batch_size, std::mt19937_64& rng,
                                 double* drift, double* max_grad_norm) {
  if (local_iters < 1) throw std::invalid_argument("local_update: need at least one local iteration");
  const std::size_t rows = problem.client_rows(k);
  std::vector<std::size_t> batch;
  std::vector<double> grad;
  std::vector<double> local = theta;
  double max_norm = 0.0;
  for (int step = 0; step < local_iters; ++step) {
    batch.clear();
    if (batch_size > 0 && rows > 0) {
      std::uniform_int_distribution<std::size_t> pick(0, rows - 1);
      for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(pick(rng));
    }
    problem.client_gradient(k, local, batch, grad);
    max_norm = std::max(max_norm, std::sqrt(squared_norm(grad)));
    if (local_iters == 1) break;
    for (std::size_t i = 0; i < local.size(); ++i) local[i] -= eta * grad[i];
  }
  if (max_grad_norm) *max_grad_norm = max_norm;
  if (local_iters == 1) {
    if (drift) *drift = 0.0;
    return grad;
  }
  std::vector<double> effective(theta.size());
  double d2 = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double diff = theta[i] - local[i];
    d2 += diff * diff;
    effective[i] = diff / eta;
  }
  if (drift) *drift = d2;
  return effective;
}

Simulation::Simulation(FlRunConfig cfg, Problem problem, Compressor compressor)
    : cfg_(std::move(cfg)), problem_(std::move(problem)), compressor_(std::move(compressor)) {
  cfg_.validate();
  if (problem_.clients() != static_cast<std::size_t>(cfg_.clients))
    throw std::invalid_argument("problem has " + std::to_string(problem_.clients()) + " clients but config asks for " +
                                std::to_string(cfg_.clients));
  theta_ = cfg_.theta0.empty() ? std::vector<double>(problem_.dim(), 0.0) : cfg_.theta0;
  if (theta_.size() != problem_.dim())
    throw std::invalid_argument("theta0 has dimension " + std::to_string(theta_.size()) + ", problem needs " +
                                std::to_string(problem_.dim()));
  for (int k = 0; k < cfg_.clients; ++k) client_rng_.push_back(derive_rng(cfg_.seed, kClientStream, k));
  participation_rng_ = derive_rng(cfg_.seed, kParticipationStream, 0);
}

Simulation::Simulation(const FlRunConfig& cfg)
    : Simulation(cfg, build_problem(cfg), resolve_compressor(cfg.compressor)) {}

void Simulation::fill_metrics(RoundRecord& rec) const {
  rec.loss = problem_.global_loss(theta_);
  if (problem_.optimum()) rec.gap = rec.loss - problem_.optimal_loss();
  rec.acc = problem_.test_accuracy(theta_);
  rec.cum_bits = cum_bits_;
}

RoundRecord Simulation::initial_record() const {
  RoundRecord rec;
  rec.round = 0;
  fill_metrics(rec);
  rec.cum_bits = 0;
  return rec;
}

std::vector<int> Simulation::sample_participants() {
  std::vector<int> ids(static_cast<std::size_t>(cfg_.clients));
  std::iota(ids.begin(), ids.end(), 0);
  if (cfg_.participation >= 1.0) return ids;
  const auto m = std::max<long>(1, std::lround(cfg_.participation * cfg_.clients));
  std::shuffle(ids.begin(), ids.end(), participation_rng_);
  ids.resize(static_cast<std::size_t>(m));
  std::sort(ids.begin(), ids.end());
  return ids;
}

ClientUpdate Simulation::client_round(std::size_t k, double eta) {
  ClientUpdate up;
  up.gradient = local_update(problem_, k, theta_, cfg_.local_iters, eta, cfg_.batch_size, client_rng_[k],
                             &up.drift, &up.max_grad_norm);
  if (compressor_.kind == CompressorKind::None) {
    up.sigma = normalize(up.gradient).stats.stddev;
    up.reconstructed = up.gradient;
    up.bits = kFullPrecisionBits * up.gradient.size();
    return up;
  }
  try {
    const auto msg = client_compress(up.gradient, *compressor_.spec, *compressor_.book);
    up.sigma = msg.stats.stddev;
    up.bits = msg.total_bits;
    up.reconstructed = server_reconstruct(msg, *compressor_.spec, *compressor_.book);
  } catch (const std::exception& e) {
    throw std::runtime_error("client " + std::to_string(k) + ": " + e.what());
  }
  return up;
}

RoundRecord Simulation::run_round() {
  const double eta = learning_rate(cfg_.schedule, round_, cfg_.local_iters);
  const std::vector<int> ids = sample_participants();
  std::vector<ClientUpdate> updates(ids.size());

  const std::size_t workers = std::min<std::size_t>(std::max(cfg_.threads, 1), ids.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < ids.size(); ++i) updates[i] = client_round(static_cast<std::size_t>(ids[i]), eta);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < ids.size(); i += workers)
            updates[i] = client_round(static_cast<std::size_t>(ids[i]), eta);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  const std::size_t d = theta_.size();
  const double inv_m = 1.0 / static_cast<double>(ids.size());
  std::vector<double> g_bar(d, 0.0), g_true(d, 0.0);
  RoundRecord rec;
  rec.round = round_ + 1;
  rec.eta = eta;
  rec.participants = ids;
  rec.client_bits.assign(static_cast<std::size_t>(cfg_.clients), 0);
  rec.client_sigma.assign(static_cast<std::size_t>(cfg_.clients), 0.0);
  rec.client_grad_norm.assign(static_cast<std::size_t>(cfg_.clients), 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& up = updates[i];
    const auto k = static_cast<std::size_t>(ids[i]);
    for (std::size_t j = 0; j < d; ++j) {
      g_bar[j] += up.reconstructed[j];
      g_true[j] += up.gradient[j];
    }
    rec.client_bits[k] = up.bits;
    rec.client_sigma[k] = up.sigma;
    rec.client_grad_norm[k] = up.max_grad_norm;
    rec.drift += up.drift;
    cum_bits_ += up.bits;
  }
  rec.drift *= inv_m;
  for (std::size_t j = 0; j < d; ++j) {
    g_bar[j] *= inv_m;
    g_true[j] *= inv_m;
    rec.qerr += (g_bar[j] - g_true[j]) * (g_bar[j] - g_true[j]);
    theta_[j] -= eta * g_bar[j];
  }
  ++round_;
  fill_metrics(rec);
  return rec;
}

MetricsLog Simulation::run() {
  MetricsLog log;
  log.records.reserve(static_cast<std::size_t>(cfg_.rounds) + 1);
  if (round_ == 0) log.records.push_back(initial_record());
  while (round_ < cfg_.rounds) log.records.push_back(run_round());
  log.final_model = theta_;
  return log;
}

MetricsLog run_training(const FlRunConfig& cfg) { return Simulation(cfg).run(); }

void MetricsLog::write_csv(std::ostream& out) const {
  out << "round,loss,gap,cum_bits,acc\n";
  for (const auto& r : records)
    out << r.round << ',' << format_metric(r.loss) << ',' << format_metric(r.gap) << ',' << r.cum_bits << ','
        << format_metric(r.acc) << '\n';
}

std::string MetricsLog::csv() const {
  std::ostringstream out;
  write_csv(out);
  return out.str();
}

}  // namespace rcq
