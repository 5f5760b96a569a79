#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "rcq/cli.hpp"

using namespace rcq;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rcq_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double field(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + "=");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 1));
}

fs::path write_config(const fs::path& dir, const nlohmann::json& doc) {
  const auto path = dir / "config.json";
  std::ofstream(path) << doc.dump(2);
  return path;
}

nlohmann::json testbed_json(int rounds) {
  auto doc = to_json(quadratic_testbed(rounds));
  return doc;
}

nlohmann::json wide_quadratic_json(int rounds, ScheduleKind schedule = ScheduleKind::Constant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> centers(4, std::vector<double>(256));
  for (auto& c : centers)
    for (auto& x : c) x = nd(rng);
  FlRunConfig cfg;
  cfg.clients = 4;
  cfg.rounds = rounds;
  cfg.seed = 3;
  cfg.schedule.kind = schedule;
  cfg.schedule.eta = 0.3;
  cfg.problem.centers = centers;
  return to_json(cfg);
}

std::vector<std::map<std::string, std::string>> read_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string cell;
    while (std::getline(h, cell, ',')) header.push_back(cell);
  }
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    std::istringstream l(line);
    std::string cell;
    std::map<std::string, std::string> row;
    for (const auto& name : header) {
      std::getline(l, cell, ',');
      row[name] = cell;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("design prints the Lloyd-Max distortion") {
  const auto dir = scratch("design");
  const auto r = run({"design", "--dist", "normal", "--b", "2", "--lambda", "0", "--out", dir.string()});
  REQUIRE(r.code == kExitOk);
  CHECK(std::abs(field(r.out, "mse") - 0.11755) < 1e-3);
  CHECK(fs::exists(dir / "quantizer.json"));
  CHECK(fs::exists(dir / "design_report.json"));
  CHECK(fs::exists(dir / "manifest.json"));
  const auto spec = quantizer_from_json(nlohmann::json::parse(slurp(dir / "quantizer.json")));
  CHECK(spec.cells() == 4);
}

TEST_CASE("design for a target rate") {
  const auto dir = scratch("target");
  const auto r = run({"design", "--dist", "normal", "--b", "3", "--target-rate", "2.0", "--out", dir.string()});
  REQUIRE(r.code == kExitOk);
  const auto spec = quantizer_from_json(nlohmann::json::parse(slurp(dir / "quantizer.json")));
  const double rate = rate_of(spec, Distribution::standard_normal());
  CHECK(rate >= 1.99);
  CHECK(rate <= 2.0);
}

TEST_CASE("design on an empirical sample") {
  const auto dir = scratch("empirical");
  std::ofstream(dir / "samples.txt") << "-1.2 -0.4 0.1 0.3\n0.9 1.7 -2.0 0.05\n";
  const auto r = run({"design", "--dist", "empirical", "--samples", (dir / "samples.txt").string(), "--b", "1",
                      "--out", dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(field(r.out, "cells") == 2.0);
}

TEST_CASE("usage errors") {
  CHECK(run({"design", "--b", "0"}).code == kExitUsage);
  CHECK(run({"design", "--b", "2", "--mode", "fancy"}).code == kExitUsage);
  CHECK(run({"design"}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"compress"}).code == kExitUsage);
  CHECK(run({"train", "--config", "/nonexistent/config.json"}).code == kExitUsage);
}

TEST_CASE("every subcommand documents its flags") {
  const std::map<std::string, std::vector<std::string>> flags{
      {"design", {"--dist", "--b", "--lambda", "--target-rate", "--mode", "--out", "--seed"}},
      {"train", {"--config", "--seed", "--threads", "--out"}},
      {"sweep", {"--config", "--lambdas", "--bits", "--jobs", "--seed", "--out"}},
      {"verify", {"--config", "--seed", "--out"}}};
  for (const auto& [cmd, names] : flags) {
    const auto r = run({cmd, "--help"});
    CAPTURE(cmd);
    CHECK(r.code == kExitOk);
    for (const auto& f : names) CHECK(r.out.find(f) != std::string::npos);
  }
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("train reaches the optimum and is reproducible") {
  const auto dir = scratch("train");
  const auto config = write_config(dir, testbed_json(2000));
  const auto a = run({"train", "--config", config.string(), "--out", (dir / "a").string()});
  REQUIRE(a.code == kExitOk);
  CHECK(field(a.out, "final_gap") < 1e-4);
  const auto b = run({"train", "--config", config.string(), "--out", (dir / "b").string()});
  REQUIRE(b.code == kExitOk);
  CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
  CHECK(fs::exists(dir / "a" / "manifest.json"));

  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest.dump().find("\"rounds\":2000") != std::string::npos);
}

TEST_CASE("train self-check") {
  const auto dir = scratch("check");
  auto doc = wide_quadratic_json(5);
  doc["compressor"] = {{"kind", "rcfed"}, {"bits", 3}, {"lambda", 0.05}};
  const auto config = write_config(dir, doc);
  const auto r = run({"train", "--config", config.string(), "--check", "--out", dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("self_check=pass") != std::string::npos);
  CHECK(fs::exists(dir / "quantizer.json"));
}

TEST_CASE("malformed config is rejected") {
  const auto dir = scratch("badconfig");
  auto doc = testbed_json(10);
  doc["unexpected"] = true;
  const auto config = write_config(dir, doc);
  const auto r = run({"train", "--config", config.string(), "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("unexpected") != std::string::npos);
}

TEST_CASE("sweep rows and baselines") {
  const auto dir = scratch("sweep");
  const auto config = write_config(dir, wide_quadratic_json(200, ScheduleKind::Theorem));
  const auto r = run({"sweep", "--config", config.string(), "--lambdas", "0,0.02,0.04,0.06,0.08,0.1", "--jobs", "4",
                      "--out", dir.string()});
  REQUIRE(r.code == kExitOk);
  const auto rows = read_csv(slurp(dir / "sweep.csv"));
  CHECK(rows.size() == 2 * 6 + 4);

  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(std::stoull(rows[i - 1].at("cum_bits")) <= std::stoull(rows[i].at("cum_bits")));

  for (const char* bits : {"3", "6"}) {
    const std::map<std::string, std::string>* zero = nullptr;
    const std::map<std::string, std::string>* lloyd = nullptr;
    for (const auto& row : rows) {
      if (row.at("bits") != bits) continue;
      if (row.at("method") == "rcfed" && std::stod(row.at("lambda")) == 0.0) zero = &row;
      if (row.at("method") == "lloyd_max") lloyd = &row;
    }
    REQUIRE(zero != nullptr);
    REQUIRE(lloyd != nullptr);
    CHECK(zero->at("final_loss") == lloyd->at("final_loss"));
    CHECK(zero->at("cum_bits") == lloyd->at("cum_bits"));
  }

  // No uniform row may dominate a rate-constrained row at the same width.
  for (const auto& u : rows) {
    if (u.at("method") != "uniform_qsgd") continue;
    for (const auto& rc : rows) {
      if (rc.at("method") != "rcfed" || rc.at("bits") != u.at("bits")) continue;
      const bool fewer_bits = std::stoull(u.at("cum_bits")) <= std::stoull(rc.at("cum_bits"));
      const bool lower_loss = std::stod(u.at("final_loss")) < std::stod(rc.at("final_loss"));
      CHECK_FALSE((fewer_bits && lower_loss));
    }
  }
  // At three bits some rate-constrained row sends no more bits than the uniform
  // baseline at a final loss that matches it to 0.1% or better.
  bool dominated = false;
  for (const auto& u : rows) {
    if (u.at("method") != "uniform_qsgd" || u.at("bits") != "3") continue;
    for (const auto& rc : rows)
      if (rc.at("method") == "rcfed" && rc.at("bits") == "3" &&
          std::stoull(rc.at("cum_bits")) <= std::stoull(u.at("cum_bits")) &&
          std::stod(rc.at("final_loss")) <= 1.001 * std::stod(u.at("final_loss")))
        dominated = true;
  }
  CHECK(dominated);
}

TEST_CASE("sweep validation and parallel determinism") {
  const auto dir = scratch("sweep2");
  const auto config = write_config(dir, wide_quadratic_json(10));
  CHECK(run({"sweep", "--config", config.string(), "--lambdas", "", "--out", dir.string()}).code == kExitUsage);
  CHECK(run({"sweep", "--config", config.string(), "--lambdas", "0.05,0.02", "--out", dir.string()}).code ==
        kExitUsage);
  CHECK(run({"sweep", "--config", config.string(), "--lambdas", "-0.1", "--out", dir.string()}).code == kExitUsage);

  const auto one = run({"sweep", "--config", config.string(), "--bits", "2,3", "--jobs", "1", "--reps", "2", "--out",
                        (dir / "one").string()});
  const auto three = run({"sweep", "--config", config.string(), "--bits", "2,3", "--jobs", "3", "--reps", "2",
                          "--threads", "4", "--out", (dir / "three").string()});
  REQUIRE(one.code == kExitOk);
  REQUIRE(three.code == kExitOk);
  CHECK(slurp(dir / "one" / "sweep.csv") == slurp(dir / "three" / "sweep.csv"));
}

TEST_CASE("sweep specification checks") {
  SweepSpec s;
  CHECK_NOTHROW(s.validate());
  s.lambdas = {};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.lambdas = {0.1, 0.05};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.lambdas = {0.0, 0.1};
  s.bits = {0};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.bits = {3};
  s.repetitions = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("verify the default testbed") {
  const auto dir = scratch("verify");
  const auto r = run({"verify", "--out", dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("theorem1: PASS") != std::string::npos);
  CHECK(r.out.find("lemma1_drift: PASS") != std::string::npos);
  CHECK(fs::exists(dir / "theory_report.csv"));
}

TEST_CASE("verify with a constant step size") {
  const auto dir = scratch("verify_const");
  auto doc = testbed_json(100);
  doc["schedule"] = {{"kind", "constant"}, {"eta", 0.1}};
  const auto config = write_config(dir, doc);
  const auto r = run({"verify", "--config", config.string(), "--out", dir.string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("schedule precondition unmet") != std::string::npos);
  CHECK(r.out.find("theorem1: SKIP") != std::string::npos);
}

TEST_CASE("verify rejects non-quadratic problems") {
  const auto dir = scratch("verify_blobs");
  nlohmann::json doc = {{"clients", 3}, {"rounds", 5}, {"problem", {{"kind", "logistic_blobs"}, {"features", 4}}}};
  const auto config = write_config(dir, doc);
  CHECK(run({"verify", "--config", config.string(), "--out", dir.string()}).code == kExitUsage);
}
