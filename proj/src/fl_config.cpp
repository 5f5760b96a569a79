#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "rcq/fl_sim.hpp"

namespace rcq {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!keys.count(key)) throw std::invalid_argument(where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

Schedule schedule_from_json(const json& j) {
  reject_unknown(j, "schedule", {"kind", "eta", "rho", "L"});
  Schedule s;
  const std::string kind = j.value("kind", std::string("constant"));
  if (kind == "constant")
    s.kind = ScheduleKind::Constant;
  else if (kind == "theorem")
    s.kind = ScheduleKind::Theorem;
  else
    throw std::invalid_argument("schedule: unknown kind '" + kind + "' (expected constant|theorem)");
  read(j, "eta", s.eta);
  read(j, "rho", s.rho);
  read(j, "L", s.L);
  return s;
}

ProblemConfig problem_from_json(const json& j) {
  ProblemConfig p;
  const std::string kind = j.value("kind", std::string("quadratic"));
  if (kind == "quadratic") {
    reject_unknown(j, "problem", {"kind", "centers"});
    p.kind = ProblemKind::QuadraticConsensus;
    read(j, "centers", p.centers);
  } else if (kind == "logistic_blobs") {
    reject_unknown(j, "problem",
                   {"kind", "features", "samples_per_client", "test_samples", "beta", "separation", "l2"});
    p.kind = ProblemKind::LogisticBlobs;
    read(j, "features", p.blobs.features);
    read(j, "samples_per_client", p.blobs.samples_per_client);
    read(j, "test_samples", p.blobs.test_samples);
    read(j, "beta", p.blobs.beta);
    read(j, "separation", p.blobs.separation);
    read(j, "l2", p.blobs.l2);
  } else if (kind == "linear_regression") {
    reject_unknown(j, "problem", {"kind", "features", "samples_per_client", "noise", "shift", "l2"});
    p.kind = ProblemKind::LinearRegression;
    read(j, "features", p.regression.features);
    read(j, "samples_per_client", p.regression.samples_per_client);
    read(j, "noise", p.regression.noise);
    read(j, "shift", p.regression.shift);
    read(j, "l2", p.regression.l2);
  } else {
    throw std::invalid_argument("problem: unknown kind '" + kind +
                                "' (expected quadratic|logistic_blobs|linear_regression)");
  }
  return p;
}

CompressorConfig compressor_from_json(const json& j) {
  reject_unknown(j, "compressor", {"kind", "bits", "lambda", "mode", "clip", "target_rate", "max_iters", "init"});
  CompressorConfig c;
  const std::string kind = j.value("kind", std::string("none"));
  if (kind == "none")
    c.kind = CompressorKind::None;
  else if (kind == "rcfed")
    c.kind = CompressorKind::RcFed;
  else if (kind == "lloyd_max")
    c.kind = CompressorKind::LloydMax;
  else if (kind == "uniform_qsgd")
    c.kind = CompressorKind::UniformQsgd;
  else
    throw std::invalid_argument("compressor: unknown kind '" + kind +
                                "' (expected none|rcfed|lloyd_max|uniform_qsgd)");
  read(j, "bits", c.bits);
  read(j, "lambda", c.lambda);
  read(j, "clip", c.clip);
  read(j, "max_iters", c.max_iters);
  if (j.contains("mode")) c.mode = parse_length_mode(j.at("mode").get<std::string>());
  if (j.contains("target_rate")) c.target_rate = j.at("target_rate").get<double>();
  if (j.contains("init")) {
    const std::string init = j.at("init").get<std::string>();
    if (init == "quantile")
      c.init = InitMode::Quantile;
    else if (init == "companded")
      c.init = InitMode::Companded;
    else
      throw std::invalid_argument("compressor: unknown init '" + init + "' (expected quantile|companded)");
  }
  return c;
}

}  // namespace

void FlRunConfig::validate() const {
  if (clients < 1) throw std::invalid_argument("config: clients must be >= 1");
  if (rounds < 1) throw std::invalid_argument("config: rounds must be >= 1");
  if (local_iters < 1) throw std::invalid_argument("config: local_iters must be >= 1");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (!(participation > 0.0 && participation <= 1.0))
    throw std::invalid_argument("config: participation must lie in (0, 1]");
  if (schedule.kind == ScheduleKind::Constant && !(schedule.eta > 0.0))
    throw std::invalid_argument("config: constant schedule needs eta > 0");
  if (schedule.kind == ScheduleKind::Theorem && !(schedule.rho > 0.0 && schedule.L >= schedule.rho))
    throw std::invalid_argument("config: theorem schedule needs 0 < rho <= L");
  if (compressor.kind != CompressorKind::None) {
    if (compressor.bits < 1 || compressor.bits > 16)
      throw std::invalid_argument("config: compressor bits must lie in [1, 16]");
    if (!(compressor.lambda >= 0.0)) throw std::invalid_argument("config: lambda must be non-negative");
    if (compressor.max_iters < 1) throw std::invalid_argument("config: max_iters must be >= 1");
  }
  if (problem.kind == ProblemKind::QuadraticConsensus && !problem.centers.empty() &&
      problem.centers.size() != static_cast<std::size_t>(clients))
    throw std::invalid_argument("config: quadratic problem needs one center per client");
}

FlRunConfig config_from_json(const json& doc) {
  reject_unknown(doc, "config",
                 {"clients", "rounds", "local_iters", "seed", "threads", "batch_size", "participation", "schedule",
                  "problem", "compressor", "theta0"});
  FlRunConfig cfg;
  read(doc, "clients", cfg.clients);
  read(doc, "rounds", cfg.rounds);
  read(doc, "local_iters", cfg.local_iters);
  read(doc, "seed", cfg.seed);
  read(doc, "threads", cfg.threads);
  read(doc, "batch_size", cfg.batch_size);
  read(doc, "participation", cfg.participation);
  read(doc, "theta0", cfg.theta0);
  if (doc.contains("schedule")) cfg.schedule = schedule_from_json(doc.at("schedule"));
  if (doc.contains("problem")) cfg.problem = problem_from_json(doc.at("problem"));
  if (doc.contains("compressor")) cfg.compressor = compressor_from_json(doc.at("compressor"));
  if (cfg.problem.kind == ProblemKind::QuadraticConsensus && cfg.problem.centers.empty())
    throw std::invalid_argument("config: quadratic problem needs centers");
  cfg.validate();
  return cfg;
}

json to_json(const CompressorConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  if (c.kind == CompressorKind::None) return j;
  j["bits"] = c.bits;
  if (c.kind == CompressorKind::UniformQsgd) {
    j["clip"] = c.clip;
    return j;
  }
  if (c.kind == CompressorKind::RcFed) {
    j["lambda"] = c.lambda;
    if (c.target_rate) j["target_rate"] = *c.target_rate;
  }
  j["mode"] = to_string(c.mode);
  j["max_iters"] = c.max_iters;
  j["init"] = c.init == InitMode::Companded ? "companded" : "quantile";
  return j;
}

json to_json(const FlRunConfig& cfg) {
  json j;
  j["clients"] = cfg.clients;
  j["rounds"] = cfg.rounds;
  j["local_iters"] = cfg.local_iters;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["batch_size"] = cfg.batch_size;
  j["participation"] = cfg.participation;
  if (!cfg.theta0.empty()) j["theta0"] = cfg.theta0;
  json s;
  if (cfg.schedule.kind == ScheduleKind::Constant) {
    s["kind"] = "constant";
    s["eta"] = cfg.schedule.eta;
  } else {
    s["kind"] = "theorem";
    s["rho"] = cfg.schedule.rho;
    s["L"] = cfg.schedule.L;
  }
  j["schedule"] = s;
  json p;
  p["kind"] = to_string(cfg.problem.kind);
  switch (cfg.problem.kind) {
    case ProblemKind::QuadraticConsensus:
      p["centers"] = cfg.problem.centers;
      break;
    case ProblemKind::LogisticBlobs:
      p["features"] = cfg.problem.blobs.features;
      p["samples_per_client"] = cfg.problem.blobs.samples_per_client;
      p["test_samples"] = cfg.problem.blobs.test_samples;
      p["beta"] = cfg.problem.blobs.beta;
      p["separation"] = cfg.problem.blobs.separation;
      p["l2"] = cfg.problem.blobs.l2;
      break;
    case ProblemKind::LinearRegression:
      p["features"] = cfg.problem.regression.features;
      p["samples_per_client"] = cfg.problem.regression.samples_per_client;
      p["noise"] = cfg.problem.regression.noise;
      p["shift"] = cfg.problem.regression.shift;
      p["l2"] = cfg.problem.regression.l2;
      break;
  }
  j["problem"] = p;
  j["compressor"] = to_json(cfg.compressor);
  return j;
}

FlRunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config '" + path + "': " + e.what());
  }
  return config_from_json(doc);
}

Problem build_problem(const FlRunConfig& cfg) {
  switch (cfg.problem.kind) {
    case ProblemKind::QuadraticConsensus:
      return Problem::quadratic(cfg.problem.centers);
    case ProblemKind::LogisticBlobs: {
      BlobsOptions o = cfg.problem.blobs;
      o.clients = static_cast<std::size_t>(cfg.clients);
      return make_logistic_blobs(o, cfg.seed);
    }
    case ProblemKind::LinearRegression: {
      RegressionOptions o = cfg.problem.regression;
      o.clients = static_cast<std::size_t>(cfg.clients);
      return make_linear_regression(o, cfg.seed);
    }
  }
  throw std::invalid_argument("unknown problem kind");
}

}  // namespace rcq
