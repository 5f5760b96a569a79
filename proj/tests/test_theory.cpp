#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rcq/cli.hpp"
#include "rcq/theory.hpp"

using namespace rcq;

namespace {

// Values printed by tests/oracles/oracle_values.py.
constexpr double kConstantCExample = 8.355822259278066;
constexpr double kQuantErrUnit = 1.423289037112261;

TheoryConstants flat_constants(std::size_t clients) {
  TheoryConstants c;
  c.zeta.assign(clients, 0.0);
  c.sigma.assign(clients, 0.0);
  return c;
}

}  // namespace

TEST_CASE("quadratic constants") {
  const auto p = Problem::quadratic({{0.0, 2.0}, {2.0, 0.0}});
  const auto c = exact_constants_quadratic(p, {0.0, 0.0}, 1);
  CHECK(c.L == 1.0);
  CHECK(c.rho == 1.0);
  CHECK(c.theta_star == std::vector<double>{1.0, 1.0});
  CHECK(c.Gamma == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.gamma == 7.0);
  CHECK(c.init_dist2 == doctest::Approx(2.0));
  for (double z : c.zeta) CHECK(z > 0.0);

  CHECK(exact_constants_quadratic(Problem::quadratic({{3.0, 1.0}, {3.0, 1.0}, {3.0, 1.0}}), {0.0, 0.0}, 1).Gamma ==
        doctest::Approx(0.0));
  CHECK(exact_constants_quadratic(Problem::quadratic({{5.0, -1.0}}), {0.0, 0.0}, 1).Gamma == doctest::Approx(0.0));

  const auto moved = exact_constants_quadratic(Problem::quadratic({{10.0, 12.0}, {12.0, 10.0}}), {0.0, 0.0}, 1);
  CHECK(moved.Gamma == doctest::Approx(c.Gamma).epsilon(1e-12));

  const auto reg = make_linear_regression({}, 1);
  CHECK_THROWS_AS(exact_constants_quadratic(reg, std::vector<double>(reg.dim(), 0.0), 1), std::invalid_argument);
}

TEST_CASE("constant C") {
  auto c = flat_constants(2);
  CHECK(constant_C(c, 1, 2, 1.0) == 0.0);
  c.Gamma = 1.0;
  CHECK(constant_C(c, 1, 2, 1.0) == doctest::Approx(6.0));

  auto d = flat_constants(2);
  d.sigma = {1.0, 1.0};
  d.zeta = {1.0, 1.0};
  CHECK(constant_C(d, 2, 2, 1.0) == doctest::Approx(kConstantCExample).epsilon(1e-12));
  CHECK(constant_C(d, 2, 2, std::numeric_limits<double>::infinity()) == doctest::Approx(8.0));
}

TEST_CASE("theorem bound decays as 1/t") {
  auto c = flat_constants(2);
  c.Gamma = 1.0;
  c.gamma = 7.0;
  const double a = theorem1_bound(c, 2.0, 1000, 1, 2, 3.0);
  const double b = theorem1_bound(c, 2.0, 2000, 1, 2, 3.0);
  CHECK(std::abs(a / b - 2.0) / 2.0 < 0.01);

  auto zero = flat_constants(2);
  zero.gamma = 7.0;
  CHECK(theorem1_bound(zero, 2.0, 10, 1, 2, 3.0) == doctest::Approx(1.0 * 8.0 * 2.0 / (2.0 * 17.0)));
}

TEST_CASE("lemma right-hand sides") {
  const std::vector<double> ones{1.0, 1.0};
  CHECK(lemma1_rhs(0.3, 1, ones, 2) == 0.0);
  CHECK(lemma1_rhs(0.1, 3, ones, 2) == doctest::Approx(0.16));
  CHECK(lemma2_rhs(std::vector<double>{0.0, 0.0}, 2, 2.0) == 0.0);
  CHECK(lemma2_rhs(std::vector<double>{1.0}, 1, 0.0) == doctest::Approx(kQuantErrUnit).epsilon(1e-12));
  CHECK(lemma2_rhs(std::vector<double>{1.0}, 1, 1.0) == doctest::Approx(kQuantErrUnit / 4.0).epsilon(1e-12));
}

TEST_CASE("high-rate residual") {
  const auto d = Distribution::standard_normal();
  const auto low = highrate_residual(design_quantizer(d, 1, 0.0).spec, d);
  CHECK(std::isfinite(low.residual));
  CHECK(low.rate == doctest::Approx(1.0));

  DesignOptions opts;
  opts.init = InitMode::Companded;
  opts.max_iters = 2000;
  const auto high = highrate_residual(design_quantizer(d, 8, 0.0, opts).spec, d);
  CHECK(std::abs(high.panter_dite_mse - high.interior_mse) / high.interior_mse < 0.02);
  CHECK(high.interior_mass > 0.999);
  CHECK(high.entropy == doctest::Approx(0.5 * std::log2(2.0 * kPi * kEuler)).epsilon(1e-9));
}

TEST_CASE("verification on the quadratic testbed") {
  const auto cfg = quadratic_testbed(300);
  const auto comp = resolve_compressor(cfg.compressor);
  const auto log = run_training(cfg);
  const auto c = exact_constants_quadratic(build_problem(cfg), std::vector<double>(2, 0.0), cfg.local_iters);
  const auto rep = verify_trajectory(cfg, log, c, comp);
  CHECK(rep.theorem_checked);
  CHECK(rep.ok());
  CHECK(rep.violations.empty());
  CHECK(rep.rows.size() == log.records.size());
  for (const auto& row : rep.rows) {
    CHECK(row.gap <= row.bound);
    CHECK(row.drift == 0.0);
    CHECK(row.drift_bound == 0.0);
  }
  CHECK(std::isinf(compressor_rate(comp)));

  std::ostringstream csv;
  rep.write_csv(csv);
  CHECK(csv.str().rfind("t,gap,bound,drift,drift_bound,qerr,qerr_bound\n", 0) == 0);
}

TEST_CASE("multi-step drift stays inside its bound") {
  auto cfg = quadratic_testbed(200);
  cfg.local_iters = 3;
  const auto comp = resolve_compressor(cfg.compressor);
  const auto log = run_training(cfg);
  const auto c = exact_constants_quadratic(build_problem(cfg), std::vector<double>(2, 0.0), 3);
  const auto rep = verify_trajectory(cfg, log, c, comp);
  CHECK(rep.drift_ok);
  CHECK(rep.theorem_ok);
  bool positive = false;
  for (const auto& row : rep.rows) {
    CHECK(row.drift <= row.drift_bound);
    positive = positive || row.drift > 0.0;
  }
  CHECK(positive);
}

TEST_CASE("constant step size skips the theorem check") {
  auto cfg = quadratic_testbed(50);
  cfg.schedule.kind = ScheduleKind::Constant;
  cfg.schedule.eta = 0.1;
  const auto comp = resolve_compressor(cfg.compressor);
  const auto log = run_training(cfg);
  const auto c = exact_constants_quadratic(build_problem(cfg), std::vector<double>(2, 0.0), 1);
  const auto rep = verify_trajectory(cfg, log, c, comp);
  CHECK_FALSE(rep.theorem_checked);
  REQUIRE_FALSE(rep.notices.empty());
  CHECK(rep.notices.front().find("theorem check skipped") != std::string::npos);
}

TEST_CASE("estimated constants") {
  auto cfg = quadratic_testbed(20);
  cfg.local_iters = 2;
  const auto log = run_training(cfg);
  const auto zeta = estimate_zeta(log, 2);
  REQUIRE(zeta.size() == 2);
  for (double z : zeta) CHECK(z == doctest::Approx(1.1 * 2.0).epsilon(1e-12));
  CHECK(estimate_xi(log) == doctest::Approx(2.0).epsilon(1e-12));
}
