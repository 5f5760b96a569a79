// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rcq/cli.hpp"
#include "rcq/gradient_codec.hpp"
#include "rcq/huffman.hpp"
#include "rcq/quantizer.hpp"
#include "rcq/theory.hpp"

using namespace rcq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const Distribution& normal01() {
  static const Distribution d = Distribution::standard_normal();
  return d;
}

Outcome ac1_lloyd_max() {
  const auto one = design_quantizer(normal01(), 1, 0.0);
  const auto two = design_quantizer(normal01(), 2, 0.0);
  const std::vector<double> u2 = two.spec.interior_boundaries();
  double worst = 0.0;
  worst = std::max(worst, std::abs(one.spec.levels[0] + 0.79788));
  worst = std::max(worst, std::abs(one.spec.levels[1] - 0.79788));
  worst = std::max(worst, std::abs(one.report.mse - 0.36338));
  worst = std::max(worst, std::abs(two.report.mse - 0.11755));
  worst = std::max(worst, std::abs(u2[0] + 0.98160));
  worst = std::max(worst, std::abs(u2[1]));
  worst = std::max(worst, std::abs(u2[2] - 0.98160));
  return {worst <= 1e-3 && one.report.converged && two.report.converged,
          "b1 mse=" + fmt("%.6f", one.report.mse) + " b2 mse=" + fmt("%.6f", two.report.mse) +
              " max_abs_err=" + fmt("%.2e", worst)};
}

Outcome ac2_boundary_structure() {
  int checked = 0, designs = 0, skipped = 0;
  double worst = 0.0;
  bool signs = true;
  for (int b = 1; b <= 6; ++b) {
    for (double lambda : {0.02, 0.05, 0.1}) {
      const auto res = design_quantizer(normal01(), b, lambda);
      if (!res.report.converged) {
        ++skipped;
        continue;
      }
      ++designs;
      const auto& s = res.spec;
      for (std::size_t l = 1; l < s.cells(); ++l) {
        const double mid = 0.5 * (s.levels[l] + s.levels[l - 1]);
        const double dl = s.lengths[l] - s.lengths[l - 1];
        const double shift = 0.5 * lambda * dl / (s.levels[l] - s.levels[l - 1]);
        worst = std::max(worst, std::abs(s.boundaries[l] - mid - shift));
        if (std::abs(dl) > 1e-9 && (s.boundaries[l] - mid > 0.0) != (dl > 0.0)) signs = false;
        ++checked;
      }
    }
  }
  return {designs > 0 && worst <= 1e-8 && signs,
          std::to_string(designs) + " converged designs (" + std::to_string(skipped) + " unconverged skipped), " +
              std::to_string(checked) +
              " boundaries, max_dev=" + fmt("%.2e", worst) + (signs ? " signs ok" : " sign mismatch")};
}

Outcome ac3_descent() {
  int iterations = 0, clamped = 0, increases = 0;
  for (int b = 1; b <= 6; ++b) {
    for (double lambda : {0.0, 0.02, 0.05, 0.1}) {
      const auto res = design_quantizer(normal01(), b, lambda);
      const auto& tr = res.report.trace;
      iterations += static_cast<int>(tr.size());
      for (std::size_t i = 0; i < tr.size(); ++i) {
        if (tr[i].clamped) ++clamped;
        if (i == 0 || tr[i].clamped || tr[i].merged) continue;
        if (tr[i].objective > tr[i - 1].objective + 1e-8) ++increases;
      }
    }
  }
  const double share = iterations ? static_cast<double>(clamped) / iterations : 0.0;
  return {increases == 0 && share < 0.05,
          std::to_string(iterations) + " iterations, " + std::to_string(increases) + " increases, clamp share " +
              fmt("%.2f%%", 100.0 * share)};
}

Outcome ac4_target_rate() {
  const auto res = design_for_target_rate(normal01(), 3, 2.0);
  const double r = rate_of(res.spec, normal01());
  return {r >= 1.99 && r <= 2.0,
          "rate=" + fmt("%.6f", r) + " lambda=" + fmt("%.5f", res.lambda) + " cells=" +
              std::to_string(res.spec.cells())};
}

Outcome ac5_codec() {
  std::mt19937_64 rng(2024);
  int roundtrip_failures = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + rng() % 15;
    std::vector<double> w(n);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& x : w) x = u(rng);
    const auto book = build_codebook(w);
    std::vector<std::uint32_t> seq(1 + rng() % 200);
    for (auto& s : seq) s = static_cast<std::uint32_t>(rng() % n);
    if (decode(book, encode(book, seq), seq.size()) != seq) ++roundtrip_failures;
  }

  int bound_failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 30;
    std::vector<double> p(n);
    std::exponential_distribution<double> e(1.0);
    double total = 0.0;
    for (auto& x : p) total += (x = e(rng));
    for (auto& x : p) x /= total;
    const double h = shannon_entropy(p);
    const double avg = build_codebook(p).average_length(p);
    if (!(avg >= h - 1e-12 && avg < h + 1.0)) ++bound_failures;
  }

  int accounting_failures = 0;
  const auto spec = design_quantizer(normal01(), 3, 0.05).spec;
  const auto book = build_codebook(spec.cell_probs);
  std::normal_distribution<double> nd(0.4, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> g(1 + rng() % 500);
    for (auto& x : g) x = nd(rng);
    const auto msg = client_compress(g, spec, book);
    if (msg.total_bits != msg.payload.bit_count + 64) ++accounting_failures;
  }
  return {roundtrip_failures == 0 && bound_failures == 0 && accounting_failures == 0,
          "roundtrip_fail=" + std::to_string(roundtrip_failures) + " length_bound_fail=" +
              std::to_string(bound_failures) + " accounting_fail=" + std::to_string(accounting_failures)};
}

Outcome ac6_high_rate() {
  struct Point {
    int bits;
    int cap;
  };
  const Point grid[] = {{4, 20000}, {6, 20000}, {8, 5000}, {10, 3000}};
  std::vector<double> residuals;
  std::string detail;
  for (const auto& p : grid) {
    DesignOptions opts;
    opts.init = InitMode::Companded;
    opts.max_iters = p.cap;
    const auto res = design_quantizer(normal01(), p.bits, 0.0, opts);
    const auto hr = highrate_residual(res.spec, normal01());
    residuals.push_back(std::abs(hr.residual));
    detail += "b" + std::to_string(p.bits) + "=" + fmt("%.4f", hr.residual) +
              (res.report.converged ? "" : "(unconverged@" + std::to_string(p.cap) + ")") + " ";
  }
  bool monotone = true;
  for (std::size_t i = 1; i < residuals.size(); ++i)
    if (residuals[i] > residuals[i - 1] + 0.01) monotone = false;
  const bool b8 = residuals[2] < 0.05;
  detail += b8 ? "b8 within 0.05" : "b8 exceeds 0.05";
  detail += monotone ? ", non-increasing" : ", increasing";
  return {b8 && monotone, detail};
}

struct TestbedRun {
  TheoryReport report;
  MetricsLog log;
};

TestbedRun run_testbed(const CompressorConfig& comp, int rounds, int local_iters) {
  auto cfg = quadratic_testbed(rounds);
  cfg.local_iters = local_iters;
  cfg.compressor = comp;
  Simulation sim(cfg);
  auto log = sim.run();
  const auto constants = exact_constants_quadratic(sim.problem(), cfg.theta0, local_iters);
  return {verify_trajectory(cfg, log, constants, sim.compressor()), std::move(log)};
}

CompressorConfig rcfed(int bits, double lambda) {
  CompressorConfig c;
  c.kind = CompressorKind::RcFed;
  c.bits = bits;
  c.lambda = lambda;
  c.init = InitMode::Companded;
  c.max_iters = 3000;
  return c;
}

Outcome ac7_theorem() {
  const std::pair<const char*, CompressorConfig> settings[] = {
      {"none", CompressorConfig{}}, {"b8_l0", rcfed(8, 0.0)}, {"b8_l0.05", rcfed(8, 0.05)}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, comp] : settings) {
    const auto run = run_testbed(comp, 2000, 1);
    const bool this_ok = run.report.theorem_checked && run.report.theorem_ok && std::isfinite(run.report.max_t_gap);
    ok = ok && this_ok;
    detail += std::string(name) + (this_ok ? " ok" : " VIOLATED") + " max_t_gap=" +
              fmt("%.4f", run.report.max_t_gap) + "; ";
  }
  return {ok, detail};
}

Outcome ac8_lemmas() {
  bool ok = true;
  std::string detail;
  for (int e : {2, 3}) {
    const auto run = run_testbed(CompressorConfig{}, 100, e);
    double worst = 0.0;
    for (const auto& row : run.report.rows)
      if (row.drift_bound > 0.0) worst = std::max(worst, row.drift / row.drift_bound);
    ok = ok && run.report.drift_ok;
    detail += "e" + std::to_string(e) + " drift/bound<=" + fmt("%.3f", worst) + "; ";
  }
  for (int b : {6, 8}) {
    const auto run = run_testbed(rcfed(b, 0.0), 100, 1);
    ok = ok && run.report.lemma2_checked && run.report.lemma2_ok;
    detail += "b" + std::to_string(b) + " qerr=" + fmt("%.3e", run.report.mean_qerr) + " vs " +
              fmt("%.3e", run.report.mean_qerr_bound) + "; ";
  }
  return {ok, detail};
}

FlRunConfig blobs_config() {
  FlRunConfig cfg;
  cfg.clients = 10;
  cfg.rounds = 100;
  cfg.seed = 7;
  cfg.threads = 4;
  cfg.schedule.kind = ScheduleKind::Constant;
  cfg.schedule.eta = 0.5;
  cfg.problem.kind = ProblemKind::LogisticBlobs;
  cfg.problem.blobs.clients = 10;
  cfg.problem.blobs.beta = 0.5;
  return cfg;
}

Outcome ac9_tradeoff() {
  auto cfg = blobs_config();
  cfg.compressor.kind = CompressorKind::LloydMax;
  cfg.compressor.bits = 3;
  const auto base = run_training(cfg).records.back();
  bool fewer = true, close = false;
  std::string detail = "lloyd_max bits=" + std::to_string(base.cum_bits) + " loss=" + fmt("%.5f", base.loss) + "; ";
  for (double lambda : {0.02, 0.04, 0.06, 0.08, 0.10}) {
    cfg.compressor.kind = CompressorKind::RcFed;
    cfg.compressor.lambda = lambda;
    const auto rec = run_training(cfg).records.back();
    fewer = fewer && rec.cum_bits < base.cum_bits;
    close = close || std::abs(rec.loss - base.loss) <= 0.05 * base.loss;
    detail += fmt("l=%.2f", lambda) + " bits=" + std::to_string(rec.cum_bits) + " loss=" + fmt("%.5f", rec.loss) +
              "; ";
  }
  return {fewer && close, detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int quiet_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return run_cli(args, out, err);
}

Outcome ac10_determinism() {
  const auto dir = fs::temp_directory_path() / "rcq_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto cfg = blobs_config();
  cfg.rounds = 30;
  cfg.batch_size = 32;
  cfg.participation = 0.7;
  cfg.compressor = rcfed(3, 0.04);
  const auto config = dir / "config.json";
  std::ofstream(config) << to_json(cfg).dump(2);

  int bad_exit = 0;
  for (const char* threads : {"1", "4"})
    for (const char* run : {"a", "b"})
      bad_exit += quiet_cli({"train", "--config", config.string(), "--threads", threads, "--out",
                             (dir / ("train_" + std::string(threads) + run)).string()}) != kExitOk;
  const std::string ref = slurp(dir / "train_1a" / "metrics.csv");
  const bool train_same = !ref.empty() && ref == slurp(dir / "train_1b" / "metrics.csv") &&
                          ref == slurp(dir / "train_4a" / "metrics.csv") &&
                          ref == slurp(dir / "train_4b" / "metrics.csv");

  const std::vector<std::pair<std::string, std::string>> sweeps{{"1", "1"}, {"1", "1"}, {"4", "3"}};
  std::vector<std::string> csvs;
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    const auto out = dir / ("sweep_" + std::to_string(i));
    bad_exit += quiet_cli({"sweep", "--config", config.string(), "--rounds", "10", "--threads", sweeps[i].first,
                           "--jobs", sweeps[i].second, "--out", out.string()}) != kExitOk;
    csvs.push_back(slurp(out / "sweep.csv"));
  }
  const bool sweep_same = !csvs[0].empty() && csvs[0] == csvs[1] && csvs[0] == csvs[2];
  fs::remove_all(dir);
  return {bad_exit == 0 && train_same && sweep_same,
          std::string("train ") + (train_same ? "identical" : "DIFFERS") + ", sweep " +
              (sweep_same ? "identical" : "DIFFERS") + " across threads 1/4 and repeated runs"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"AC1", "Lloyd-Max recovery", 1.0, ac1_lloyd_max},
      {"AC2", "rate-shifted boundary structure", 1.0, ac2_boundary_structure},
      {"AC3", "descent property", 10.0, ac3_descent},
      {"AC4", "target-rate design", 5.0, ac4_target_rate},
      {"AC5", "codec exactness", 10.0, ac5_codec},
      {"AC6", "high-rate identity", 30.0, ac6_high_rate},
      {"AC7", "convergence bound dominance", 60.0, ac7_theorem},
      {"AC8", "lemma dominance", 60.0, ac8_lemmas},
      {"AC9", "rate/loss trade-off on logistic blobs", 300.0, ac9_tradeoff},
      {"AC10", "determinism", 60.0, ac10_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s %s %s: %s [%.2fs / %.0fs budget%s]\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(),
                secs, c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
