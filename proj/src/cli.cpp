#include "rcq/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "rcq/gradient_codec.hpp"
#include "rcq/quantizer.hpp"
#include "rcq/theory.hpp"

namespace rcq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
  const char* raw = std::getenv("RCQ_LOG");
  if (!raw) return LogLevel::Info;
  const std::string v(raw);
  if (v == "quiet" || v == "0" || v == "off") return LogLevel::Quiet;
  if (v == "debug" || v == "2") return LogLevel::Debug;
  return LogLevel::Info;
}

class Logger {
 public:
  explicit Logger(std::ostream& sink) : sink_(sink), level_(log_level()) {}
  void info(const std::string& msg) const {
    if (level_ >= LogLevel::Info) sink_ << "[rcq] " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ >= LogLevel::Debug) sink_ << "[rcq:debug] " << msg << '\n';
  }

 private:
  std::ostream& sink_;
  LogLevel level_;
};

std::string num(double v) { return std::isnan(v) ? "nan" : format_double(v); }

std::string gigabits(std::uint64_t bits) {
  std::ostringstream s;
  s.precision(9);
  s << std::fixed << static_cast<double>(bits) / 1e9;
  return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                    const json& resolved, const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "rcq";
  m["command"] = command;
  m["args"] = args;
  m["resolved"] = resolved;
  m["outputs"] = outputs;
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

json report_json(const DesignReport& r) {
  json j;
  j["iterations"] = r.iterations;
  j["mse"] = format_double(r.mse);
  j["rate"] = format_double(r.rate);
  j["objective"] = format_double(r.objective);
  j["clamp_events"] = r.clamp_events;
  j["merge_events"] = r.merge_events;
  j["final_cells"] = r.final_cells;
  j["converged"] = r.converged;
  return j;
}

std::vector<double> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open samples file '" + path + "'");
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok));
  return out;
}

// Self-check: bit accounting and record ordering.
std::vector<std::string> check_log(const MetricsLog& log) {
  std::vector<std::string> problems;
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    const auto& prev = log.records[i - 1];
    const auto& cur = log.records[i];
    std::uint64_t round_bits = 0;
    for (auto b : cur.client_bits) round_bits += b;
    if (cur.round != prev.round + 1) problems.push_back("round numbering broken at " + std::to_string(cur.round));
    if (cur.cum_bits != prev.cum_bits + round_bits)
      problems.push_back("cumulative bits mismatch at round " + std::to_string(cur.round));
    if (round_bits == 0) problems.push_back("no uplink bits at round " + std::to_string(cur.round));
    if (!std::isfinite(cur.loss)) problems.push_back("non-finite loss at round " + std::to_string(cur.round));
  }
  return problems;
}

struct DesignArgs {
  std::string dist = "normal";
  std::string samples;
  int bits = 0;
  double lambda = 0.0;
  std::optional<double> target_rate;
  std::string mode = "ideal";
  std::string init = "quantile";
  int max_iters = 500;
  double tol = 1e-9;
  std::string out = "out";
  std::uint64_t seed = 1;
};

int cmd_design(const DesignArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Logger log(err);
  std::optional<Distribution> dist;
  if (a.dist == "normal") {
    dist = Distribution::standard_normal();
  } else if (a.dist == "empirical") {
    if (a.samples.empty()) throw CLI::ValidationError("--samples", "required with --dist empirical");
    dist = Distribution::empirical(read_samples(a.samples));
  } else {
    throw CLI::ValidationError("--dist", "expected normal or empirical");
  }
  DesignOptions opts;
  opts.mode = parse_length_mode(a.mode);
  opts.init = a.init == "companded" ? InitMode::Companded : InitMode::Quantile;
  opts.max_iters = a.max_iters;
  opts.tol = a.tol;

  QuantizerSpec spec;
  DesignReport report;
  double lambda = a.lambda;
  if (a.target_rate) {
    TargetRateOptions t;
    t.design = opts;
    log.info("bisecting lambda for target rate " + num(*a.target_rate));
    try {
      TargetRateDesign d = design_for_target_rate(*dist, a.bits, *a.target_rate, t);
      spec = std::move(d.spec);
      report = std::move(d.report);
      lambda = d.lambda;
    } catch (const InfeasibleRate& e) {
      err << "error: " << e.what() << '\n';
      return kExitRuntime;
    }
  } else {
    Design d = design_quantizer(*dist, a.bits, a.lambda, opts);
    spec = std::move(d.spec);
    report = std::move(d.report);
  }

  const fs::path dir(a.out);
  write_file(dir / "quantizer.json", to_json(spec).dump(2) + "\n");
  write_file(dir / "design_report.json", report_json(report).dump(2) + "\n");
  json resolved = {{"dist", a.dist},  {"samples", a.samples},     {"b", a.bits},        {"lambda", lambda},
                   {"mode", a.mode},  {"init", a.init},           {"max_iters", a.max_iters},
                   {"tol", a.tol},    {"seed", a.seed}};
  if (a.target_rate) resolved["target_rate"] = *a.target_rate;
  write_manifest(dir, "design", args, resolved, {"quantizer.json", "design_report.json"});

  out << "mse=" << num(report.mse) << '\n'
      << "rate=" << num(report.rate) << '\n'
      << "objective=" << num(report.objective) << '\n'
      << "lambda=" << num(lambda) << '\n'
      << "iterations=" << report.iterations << '\n'
      << "cells=" << report.final_cells << '\n'
      << "clamp_events=" << report.clamp_events << '\n'
      << "converged=" << (report.converged ? "true" : "false") << '\n';
  if (!report.converged) {
    err << "error: design did not converge within " << a.max_iters << " iterations\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> rounds;
  std::string out = "out";
  bool check = false;
};

FlRunConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed, std::optional<int> threads,
                           std::optional<int> rounds) {
  FlRunConfig cfg = load_config(path);
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;
  if (rounds) cfg.rounds = *rounds;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Logger log(err);
  const FlRunConfig cfg = resolve_config(a.config, a.seed, a.threads, a.rounds);
  log.info("training " + to_string(cfg.problem.kind) + " with " + std::to_string(cfg.clients) + " clients for " +
           std::to_string(cfg.rounds) + " rounds, compressor " + to_string(cfg.compressor.kind));
  Simulation sim(cfg);
  if (sim.compressor().report) log.debug("design rate " + num(sim.compressor().report->rate));
  const MetricsLog metrics = sim.run();

  const fs::path dir(a.out);
  write_file(dir / "metrics.csv", metrics.csv());
  std::vector<std::string> outputs{"metrics.csv"};
  if (sim.compressor().spec) {
    write_file(dir / "quantizer.json", to_json(*sim.compressor().spec).dump(2) + "\n");
    outputs.push_back("quantizer.json");
  }
  write_manifest(dir, "train", args, to_json(cfg), outputs);

  const RoundRecord& last = metrics.records.back();
  out << "final_loss=" << num(last.loss) << '\n'
      << "final_gap=" << num(last.gap) << '\n'
      << "final_acc=" << num(last.acc) << '\n'
      << "cum_bits=" << last.cum_bits << '\n'
      << "cum_gb=" << gigabits(last.cum_bits) << '\n';
  if (a.check) {
    const auto problems = check_log(metrics);
    for (const auto& p : problems) err << "self-check: " << p << '\n';
    if (!problems.empty()) return kExitCheckFailed;
    out << "self_check=pass\n";
  }
  return kExitOk;
}

struct SweepArgs {
  std::string config;
  std::vector<double> lambdas{0.02, 0.04, 0.06, 0.08, 0.10};
  std::vector<int> bits{3, 6};
  int reps = 1;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> rounds;
  std::string out = "out";
};

int cmd_sweep(const SweepArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Logger log(err);
  SweepSpec spec;
  spec.lambdas = a.lambdas;
  spec.bits = a.bits;
  spec.repetitions = a.reps;
  spec.validate();
  const FlRunConfig base = resolve_config(a.config, a.seed, a.threads, a.rounds);
  log.info("sweeping " + std::to_string(spec.lambdas.size()) + " lambdas x " + std::to_string(spec.bits.size()) +
           " bit widths x " + std::to_string(spec.repetitions) + " repetitions");
  const auto rows = run_sweep(base, spec, a.jobs);

  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  const fs::path dir(a.out);
  write_file(dir / "sweep.csv", csv.str());
  json resolved = to_json(base);
  resolved["sweep"] = {{"lambdas", spec.lambdas}, {"bits", spec.bits}, {"repetitions", spec.repetitions},
                       {"jobs", a.jobs}};
  write_manifest(dir, "sweep", args, resolved, {"sweep.csv"});

  int failures = 0;
  for (const auto& r : rows) {
    if (r.status != "ok") {
      ++failures;
      err << "row " << r.method << " b=" << r.bits << " lambda=" << num(r.lambda) << ": " << r.status << '\n';
    }
  }
  out << "rows=" << rows.size() << '\n' << "failed_rows=" << failures << '\n';
  return kExitOk;
}

struct VerifyArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> rounds;
  std::string out = "out";
};

int cmd_verify(const VerifyArgs& a, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Logger log(err);
  FlRunConfig cfg = a.config.empty() ? quadratic_testbed() : load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  if (a.rounds) cfg.rounds = *a.rounds;
  cfg.validate();
  if (cfg.problem.kind != ProblemKind::QuadraticConsensus)
    throw CLI::ValidationError("--config", "verify needs a quadratic consensus problem");

  Simulation sim(cfg);
  log.info("verifying " + std::to_string(cfg.rounds) + " rounds, compressor " + to_string(cfg.compressor.kind));
  const MetricsLog metrics = sim.run();
  const TheoryConstants constants = exact_constants_quadratic(sim.problem(), cfg.theta0, cfg.local_iters);
  const TheoryReport rep = verify_trajectory(cfg, metrics, constants, sim.compressor());

  std::ostringstream csv;
  rep.write_csv(csv);
  const fs::path dir(a.out);
  write_file(dir / "theory_report.csv", csv.str());
  write_file(dir / "metrics.csv", metrics.csv());
  write_manifest(dir, "verify", args, to_json(cfg), {"theory_report.csv", "metrics.csv"});

  for (const auto& n : rep.notices) out << "notice: " << n << '\n';
  auto status = [](bool checked, bool ok) { return !checked ? "SKIP" : ok ? "PASS" : "FAIL"; };
  out << "theorem1: " << status(rep.theorem_checked, rep.theorem_ok) << '\n'
      << "lemma1_drift: " << status(true, rep.drift_ok) << '\n'
      << "lemma2_qerr: " << status(rep.lemma2_checked, rep.lemma2_ok) << " (mean " << num(rep.mean_qerr)
      << " vs " << num(rep.mean_qerr_bound) << ")\n"
      << "max_t_gap=" << num(rep.max_t_gap) << '\n'
      << "Gamma=" << num(constants.Gamma) << " gamma=" << num(constants.gamma) << '\n';
  constexpr std::size_t kMaxListed = 20;
  for (std::size_t i = 0; i < std::min(kMaxListed, rep.violations.size()); ++i)
    out << "violation: " << rep.violations[i] << '\n';
  if (rep.violations.size() > kMaxListed) out << "... " << rep.violations.size() - kMaxListed << " more\n";
  return rep.ok() ? kExitOk : kExitCheckFailed;
}

}  // namespace

void SweepSpec::validate() const {
  if (lambdas.empty()) throw std::invalid_argument("sweep: lambda list is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 0.0) || !std::isfinite(lambdas[i]))
      throw std::invalid_argument("sweep: lambda values must be finite and non-negative");
    if (i > 0 && lambdas[i] < lambdas[i - 1]) throw std::invalid_argument("sweep: lambda values must be ascending");
  }
  if (bits.empty()) throw std::invalid_argument("sweep: bit-width list is empty");
  for (int b : bits)
    if (b < 1 || b > 16) throw std::invalid_argument("sweep: bit widths must lie in [1, 16]");
  if (repetitions < 1) throw std::invalid_argument("sweep: repetitions must be >= 1");
}

std::vector<SweepRow> run_sweep(const FlRunConfig& base, const SweepSpec& spec, int jobs) {
  spec.validate();
  struct Task {
    SweepRow row;
    CompressorConfig comp;
  };
  std::vector<Task> tasks;
  for (int rep = 0; rep < spec.repetitions; ++rep) {
    const std::uint64_t seed = base.seed + static_cast<std::uint64_t>(rep);
    for (int b : spec.bits) {
      CompressorConfig proto = base.compressor;
      proto.bits = b;
      proto.target_rate.reset();

      Task lloyd{{"lloyd_max", b, 0.0, rep, seed}, proto};
      lloyd.comp.kind = CompressorKind::LloydMax;
      lloyd.comp.lambda = 0.0;
      tasks.push_back(lloyd);

      Task uniform{{"uniform_qsgd", b, std::numeric_limits<double>::quiet_NaN(), rep, seed}, proto};
      uniform.comp.kind = CompressorKind::UniformQsgd;
      tasks.push_back(uniform);

      for (double lambda : spec.lambdas) {
        Task rc{{"rcfed", b, lambda, rep, seed}, proto};
        rc.comp.kind = CompressorKind::RcFed;
        rc.comp.lambda = lambda;
        tasks.push_back(rc);
      }
    }
  }

  auto run_one = [&](Task& task) {
    SweepRow& row = task.row;
    try {
      FlRunConfig cfg = base;
      cfg.seed = row.seed;
      cfg.compressor = task.comp;
      Simulation sim(cfg);
      row.design_rate = compressor_rate(sim.compressor());
      const MetricsLog log = sim.run();
      const RoundRecord& last = log.records.back();
      row.final_loss = last.loss;
      row.final_gap = last.gap;
      row.final_acc = last.acc;
      row.cum_bits = last.cum_bits;
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, tasks.size());
  if (workers == 1) {
    for (auto& t : tasks) run_one(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) run_one(tasks[i]);
      });
    for (auto& t : pool) t.join();
  }

  std::vector<SweepRow> rows;
  for (auto& t : tasks) rows.push_back(std::move(t.row));
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& x, const SweepRow& y) {
    const bool xo = x.status == "ok", yo = y.status == "ok";
    if (xo != yo) return xo;
    return xo && x.cum_bits < y.cum_bits;
  });
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "method,bits,lambda,rep,seed,status,design_rate,final_loss,final_gap,final_acc,cum_bits,cum_gb\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << r.method << ',' << r.bits << ',' << num(r.lambda) << ',' << r.rep << ',' << r.seed << ',' << status
        << ',' << num(r.design_rate) << ',' << num(r.final_loss) << ',' << num(r.final_gap) << ','
        << num(r.final_acc) << ',' << r.cum_bits << ',' << gigabits(r.cum_bits) << '\n';
  }
}

FlRunConfig quadratic_testbed(int rounds) {
  FlRunConfig cfg;
  cfg.clients = 2;
  cfg.rounds = rounds;
  cfg.local_iters = 1;
  cfg.seed = 1;
  cfg.schedule.kind = ScheduleKind::Theorem;
  cfg.schedule.rho = 1.0;
  cfg.schedule.L = 1.0;
  cfg.problem.kind = ProblemKind::QuadraticConsensus;
  cfg.problem.centers = {{0.0, 2.0}, {2.0, 0.0}};
  cfg.theta0 = {0.0, 0.0};
  cfg.compressor.kind = CompressorKind::None;
  return cfg;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rate-constrained gradient quantization and federated learning simulator", "rcq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rcq 1.0");

  DesignArgs design;
  auto* d = app.add_subcommand("design", "Design a quantizer and write its JSON spec");
  d->add_option("--dist", design.dist, "Source density: normal | empirical")
      ->check(CLI::IsMember({"normal", "empirical"}))
      ->capture_default_str();
  d->add_option("--samples", design.samples, "Whitespace-separated samples for --dist empirical");
  d->add_option("--b", design.bits, "Bit budget b (2^b cells)")->required()->check(CLI::Range(1, 16));
  d->add_option("--lambda", design.lambda, "Lagrange multiplier")->check(CLI::NonNegativeNumber)->capture_default_str();
  d->add_option("--target-rate", design.target_rate, "Bisect lambda for this rate in bits/symbol")
      ->check(CLI::PositiveNumber);
  d->add_option("--mode", design.mode, "Codeword lengths: ideal | huffman")
      ->check(CLI::IsMember({"ideal", "huffman"}))
      ->capture_default_str();
  d->add_option("--init", design.init, "Initial cells: quantile | companded")
      ->check(CLI::IsMember({"quantile", "companded"}))
      ->capture_default_str();
  d->add_option("--max-iters", design.max_iters, "Outer iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  d->add_option("--tol", design.tol, "Relative objective tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  d->add_option("--out", design.out, "Output directory")->capture_default_str();
  d->add_option("--seed", design.seed, "Seed recorded in the manifest")->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Run one federated training job and write metrics.csv");
  t->add_option("--config", train.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  t->add_option("--seed", train.seed, "Override the config seed");
  t->add_option("--threads", train.threads, "Client worker threads")->check(CLI::PositiveNumber);
  t->add_option("--rounds", train.rounds, "Override the round count")->check(CLI::PositiveNumber);
  t->add_option("--out", train.out, "Output directory")->capture_default_str();
  t->add_flag("--check", train.check, "Self-check bit accounting; exit 1 on a violation");

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "Lambda x bit-width trade-off sweep with baselines");
  s->add_option("--config", sweep.config, "Base run configuration (JSON)")->required()->check(CLI::ExistingFile);
  auto* lambdas_opt = s->add_option("--lambdas", sweep.lambdas, "Comma-separated ascending lambda values")
                          ->delimiter(',')
                          ->capture_default_str();
  auto* bits_opt =
      s->add_option("--bits", sweep.bits, "Comma-separated bit widths")->delimiter(',')->capture_default_str();
  s->add_option("--reps", sweep.reps, "Repetitions (seed, seed+1, ...)")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--jobs", sweep.jobs, "Grid points run in parallel")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--seed", sweep.seed, "Override the config seed");
  s->add_option("--threads", sweep.threads, "Client worker threads per run")->check(CLI::PositiveNumber);
  s->add_option("--rounds", sweep.rounds, "Override the round count")->check(CLI::PositiveNumber);
  s->add_option("--out", sweep.out, "Output directory")->capture_default_str();

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "Check a quadratic trajectory against the convergence bounds");
  v->add_option("--config", verify.config, "Quadratic run configuration; default is the 2-client testbed")
      ->check(CLI::ExistingFile);
  v->add_option("--seed", verify.seed, "Override the config seed");
  v->add_option("--threads", verify.threads, "Client worker threads")->check(CLI::PositiveNumber);
  v->add_option("--rounds", verify.rounds, "Override the round count")->check(CLI::PositiveNumber);
  v->add_option("--out", verify.out, "Output directory")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // An explicitly empty list leaves CLI11 holding the defaults.
  const auto given_empty = [](const CLI::Option* opt) {
    if (opt->count() == 0) return false;
    for (const auto& r : opt->results())
      if (!r.empty()) return false;
    return true;
  };
  if (given_empty(lambdas_opt)) sweep.lambdas.clear();
  if (given_empty(bits_opt)) sweep.bits.clear();

  try {
    if (d->parsed()) return cmd_design(design, args, out, err);
    if (t->parsed()) return cmd_train(train, args, out, err);
    if (s->parsed()) return cmd_sweep(sweep, args, out, err);
    if (v->parsed()) return cmd_verify(verify, args, out, err);
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace rcq
