#include "rcq/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rcq {

namespace {

constexpr double kZetaMargin = 1.1;

double distance2(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

double quantization_factor(double rate) {
  return std::isinf(rate) && rate > 0.0 ? 0.0 : std::exp2(-2.0 * rate);
}

std::string num(double v) { return std::isnan(v) ? "nan" : format_double(v); }

}  // namespace

TheoryConstants exact_constants_quadratic(const Problem& problem, const std::vector<double>& theta0,
                                          int local_iters) {
  if (problem.kind() != ProblemKind::QuadraticConsensus)
    throw std::invalid_argument("exact_constants_quadratic: problem is not quadratic consensus");
  const auto& centers = problem.centers();
  const std::vector<double> start = theta0.empty() ? std::vector<double>(problem.dim(), 0.0) : theta0;
  if (start.size() != problem.dim()) throw std::invalid_argument("exact_constants_quadratic: theta0 size mismatch");

  TheoryConstants c;
  c.L = 1.0;
  c.rho = 1.0;
  c.theta_star = *problem.optimum();
  // Every f_k attains 0, so Γ = f(θ*).
  c.Gamma = problem.global_loss(c.theta_star);
  c.gamma = schedule_gamma(c.L, c.rho, local_iters);
  c.init_dist2 = distance2(start, c.theta_star);
  for (const auto& ck : centers) {
    double radius2 = distance2(start, ck);
    for (const auto& cj : centers) radius2 = std::max(radius2, distance2(cj, ck));
    c.zeta.push_back(kZetaMargin * std::sqrt(radius2));
  }
  double xi2 = 0.0;
  for (double z : c.zeta) xi2 = std::max(xi2, z * z);
  c.xi = std::sqrt(xi2);
  c.sigma.assign(centers.size(), 0.0);
  return c;
}

std::vector<double> estimate_zeta(const MetricsLog& prerun, std::size_t clients, double margin) {
  std::vector<double> zeta(clients, 0.0);
  for (const auto& rec : prerun.records)
    for (std::size_t k = 0; k < std::min(clients, rec.client_grad_norm.size()); ++k)
      zeta[k] = std::max(zeta[k], rec.client_grad_norm[k]);
  for (double& z : zeta) z *= margin;
  return zeta;
}

double estimate_xi(const MetricsLog& prerun) {
  double best = 0.0;
  for (const auto& rec : prerun.records) {
    if (rec.client_grad_norm.empty()) continue;
    double acc = 0.0;
    for (double g : rec.client_grad_norm) acc += g * g;
    best = std::max(best, acc / static_cast<double>(rec.client_grad_norm.size()));
  }
  return std::sqrt(best);
}

double lemma2_rhs(std::span<const double> sigma, int clients, double rate) {
  double acc = 0.0;
  for (double s : sigma) acc += s * s;
  return kPi * kEuler / (6.0 * clients) * acc * quantization_factor(rate);
}

double lemma1_rhs(double eta, int local_iters, std::span<const double> zeta, int clients) {
  double acc = 0.0;
  for (double z : zeta) acc += z * z;
  const double e1 = static_cast<double>(local_iters - 1);
  return 4.0 * eta * eta * e1 * e1 * acc / clients;
}

double constant_C(const TheoryConstants& c, int local_iters, int clients, double rate) {
  double zeta2 = 0.0;
  for (double z : c.zeta) zeta2 += z * z;
  return lemma2_rhs(c.sigma, clients, rate) + 6.0 * c.L * c.Gamma +
         8.0 * static_cast<double>(local_iters - 1) / clients * zeta2;
}

double theorem1_bound(const TheoryConstants& c, double init_dist2, int t, int local_iters, int clients,
                      double rate) {
  const double C = constant_C(c, local_iters, clients, rate);
  const double gamma = schedule_gamma(c.L, c.rho, local_iters);
  return c.L / (2.0 * (t + gamma)) * std::max(4.0 * C / (c.rho * c.rho), (gamma + 1.0) * init_dist2);
}

HighRateResidual highrate_residual(const QuantizerSpec& spec, const Distribution& dist) {
  HighRateResidual out;
  out.rate = rate_of(spec, dist);
  out.mse = mse_of(spec, dist);
  out.entropy = differential_entropy(dist);
  out.residual = out.rate - (out.entropy - 0.5 * std::log2(12.0 * out.mse));
  for (std::size_t l = 1; l + 1 < spec.cells(); ++l) {
    const double a = spec.boundaries[l];
    const double b = spec.boundaries[l + 1];
    const double p = dist.mass(a, b);
    out.panter_dite_mse += p * (b - a) * (b - a) / 12.0;
    out.interior_mse += dist.squared_error(a, b, spec.levels[l]);
    out.interior_mass += p;
  }
  return out;
}

double compressor_rate(const Compressor& comp) {
  if (comp.kind == CompressorKind::None || !comp.spec) return std::numeric_limits<double>::infinity();
  return rate_of(*comp.spec, Distribution::standard_normal());
}

TheoryReport verify_trajectory(const FlRunConfig& cfg, const MetricsLog& log, const TheoryConstants& constants,
                               const Compressor& comp, const VerifyOptions& opts) {
  TheoryReport rep;
  const int K = cfg.clients;
  const int e = cfg.local_iters;
  const double rate = compressor_rate(comp);
  const double gamma = schedule_gamma(constants.L, constants.rho, e);

  rep.theorem_checked = cfg.schedule.kind == ScheduleKind::Theorem;
  if (!rep.theorem_checked) {
    rep.notices.push_back("theorem check skipped: schedule precondition unmet (constant step size)");
  } else if (cfg.schedule.L != constants.L || cfg.schedule.rho != constants.rho) {
    rep.notices.push_back("schedule (L, rho) differ from the problem constants; bound uses the problem constants");
  }
  rep.lemma2_checked = comp.kind != CompressorKind::None && comp.spec && comp.spec->bits >= opts.lemma2_min_bits;
  if (comp.kind != CompressorKind::None && !rep.lemma2_checked)
    rep.notices.push_back("quantization-error bound reported only: below " + std::to_string(opts.lemma2_min_bits) + " bits");

  double qerr_sum = 0.0, qerr_bound_sum = 0.0;
  int window = 0;
  const auto& recs = log.records;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const RoundRecord& rec = recs[i];
    TheoryRow row;
    row.t = rec.round;
    row.gap = rec.gap;

    // σ_{k,t} of the gradients taken at θ_t, i.e. the next round's record.
    TheoryConstants c = constants;
    const RoundRecord& sigma_src = i + 1 < recs.size() ? recs[i + 1] : rec;
    if (!sigma_src.client_sigma.empty()) c.sigma = sigma_src.client_sigma;
    row.bound = rep.theorem_checked ? theorem1_bound(c, constants.init_dist2, rec.round, e, K, rate)
                                    : std::numeric_limits<double>::quiet_NaN();

    if (rec.round > 0) {
      row.drift = rec.drift;
      row.drift_bound = lemma1_rhs(rec.eta, e, constants.zeta, K);
      row.qerr = rec.qerr;
      row.qerr_bound = lemma2_rhs(rec.client_sigma, K, rate);
      if (window < opts.lemma2_window) {
        qerr_sum += row.qerr;
        qerr_bound_sum += row.qerr_bound;
        ++window;
      }
    }
    if (rep.theorem_checked && !(row.gap <= row.bound)) {
      rep.theorem_ok = false;
      std::ostringstream msg;
      msg << "t=" << row.t << ": gap " << num(row.gap) << " exceeds bound " << num(row.bound);
      rep.violations.push_back(msg.str());
    }
    if (!(row.drift <= row.drift_bound)) {
      rep.drift_ok = false;
      std::ostringstream msg;
      msg << "t=" << row.t << ": drift " << num(row.drift) << " exceeds " << num(row.drift_bound);
      rep.violations.push_back(msg.str());
    }
    if (rec.round >= gamma && std::isfinite(row.gap)) rep.max_t_gap = std::max(rep.max_t_gap, rec.round * row.gap);
    rep.rows.push_back(row);
  }
  if (window > 0) {
    rep.mean_qerr = qerr_sum / window;
    rep.mean_qerr_bound = qerr_bound_sum / window;
  }
  if (rep.lemma2_checked && !(rep.mean_qerr <= rep.mean_qerr_bound)) {
    rep.lemma2_ok = false;
    rep.violations.push_back("mean quantization error " + num(rep.mean_qerr) + " over " + std::to_string(window) +
                             " rounds exceeds " + num(rep.mean_qerr_bound));
  }
  return rep;
}

void TheoryReport::write_csv(std::ostream& out) const {
  out << "t,gap,bound,drift,drift_bound,qerr,qerr_bound\n";
  for (const auto& r : rows)
    out << r.t << ',' << num(r.gap) << ',' << num(r.bound) << ',' << num(r.drift) << ',' << num(r.drift_bound) << ','
        << num(r.qerr) << ',' << num(r.qerr_bound) << '\n';
}

}  // namespace rcq
