#include "rcq/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

namespace rcq {

namespace {

std::pair<std::vector<double>, std::vector<double>> compute_gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {std::move(x), std::move(w)};
}

double normal_kernel(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * kPi); }

}  // namespace

const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: node count must be positive");
  static std::mutex mu;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

Distribution Distribution::standard_normal(Quadrature q) {
  Distribution d;
  d.kind_ = Kind::StandardNormal;
  d.quad_ = q;
  d.finish_setup();
  return d;
}

Distribution Distribution::normal(double mean, double stddev, Quadrature q) {
  if (!(stddev > 0.0) || !std::isfinite(stddev) || !std::isfinite(mean))
    throw std::invalid_argument("Distribution::normal: stddev must be positive and finite");
  Distribution d;
  d.kind_ = Kind::Normal;
  d.mean_ = mean;
  d.stddev_ = stddev;
  d.quad_ = q;
  d.finish_setup();
  return d;
}

Distribution Distribution::empirical(std::vector<double> samples, Quadrature q) {
  if (samples.size() < 2)
    throw std::invalid_argument("Distribution::empirical: need at least two samples");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  if (!(ss > 0.0)) throw std::invalid_argument("Distribution::empirical: samples have zero variance");
  const double sample_sd = std::sqrt(ss / (n - 1.0));

  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  auto at = [&](double p) {
    const double pos = p * (n - 1.0);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return i + 1 < sorted.size() ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac : sorted[i];
  };
  const double iqr = at(0.75) - at(0.25);
  double spread = sample_sd;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);

  Distribution d;
  d.kind_ = Kind::Empirical;
  d.quad_ = q;
  d.scale_ = 0.9 * spread * std::pow(n, -0.2);
  d.mean_ = mean;
  d.stddev_ = std::sqrt(ss / n + d.scale_ * d.scale_);
  d.lo_ = sorted.front() - q.radius * d.scale_;
  d.hi_ = sorted.back() + q.radius * d.scale_;
  d.samples_ = std::move(samples);
  d.finish_setup();
  return d;
}

void Distribution::finish_setup() {
  if (quad_.nodes < 1 || !(quad_.radius > 0.0) || !(quad_.panels_per_scale > 0.0))
    throw std::invalid_argument("Distribution: invalid quadrature settings");
  if (kind_ != Kind::Empirical) {
    scale_ = stddev_;
    lo_ = mean_ - quad_.radius * stddev_;
    hi_ = mean_ + quad_.radius * stddev_;
  }
  rule_ = &gauss_legendre(quad_.nodes);
  norm_ = 1.0;
  norm_ = integrate_raw(lo_, hi_, [](double) { return 1.0; });
}

double Distribution::raw_pdf(double z) const {
  if (kind_ != Kind::Empirical) return normal_kernel((z - mean_) / stddev_) / stddev_;
  double acc = 0.0;
  for (double x : samples_) acc += normal_kernel((z - x) / scale_);
  return acc / (static_cast<double>(samples_.size()) * scale_);
}

double Distribution::pdf(double z) const {
  if (!(z >= lo_ && z <= hi_)) return 0.0;
  return raw_pdf(z) / norm_;
}

template <typename Fn>
double Distribution::integrate_raw(double a, double b, Fn&& fn) const {
  a = std::max(a, lo_);
  b = std::min(b, hi_);
  if (!(b > a)) return 0.0;
  const auto& [nodes, weights] = *rule_;
  const double width = scale_ / quad_.panels_per_scale;
  const auto panels = std::max<long>(1, static_cast<long>(std::ceil((b - a) / width - 1e-9)));
  const double h = (b - a) / static_cast<double>(panels);
  double total = 0.0;
  for (long p = 0; p < panels; ++p) {
    const double left = a + h * static_cast<double>(p);
    const double mid = left + 0.5 * h;
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double z = mid + 0.5 * h * nodes[i];
      acc += weights[i] * raw_pdf(z) * fn(z);
    }
    total += 0.5 * h * acc;
  }
  return total / norm_;
}

double Distribution::integrate(double a, double b, const std::function<double(double)>& fn) const {
  return integrate_raw(a, b, fn);
}

double Distribution::mass(double a, double b) const {
  return integrate_raw(a, b, [](double) { return 1.0; });
}

CellMoments Distribution::moments(double a, double b) const {
  CellMoments m;
  a = std::max(a, lo_);
  b = std::min(b, hi_);
  if (!(b > a)) return m;
  const auto& [nodes, weights] = *rule_;
  const double width = scale_ / quad_.panels_per_scale;
  const auto panels = std::max<long>(1, static_cast<long>(std::ceil((b - a) / width - 1e-9)));
  const double h = (b - a) / static_cast<double>(panels);
  for (long p = 0; p < panels; ++p) {
    const double mid = a + h * (static_cast<double>(p) + 0.5);
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double z = mid + 0.5 * h * nodes[i];
      const double wf = weights[i] * raw_pdf(z);
      m0 += wf;
      m1 += wf * z;
    }
    m.mass += 0.5 * h * m0;
    m.first_moment += 0.5 * h * m1;
  }
  m.mass /= norm_;
  m.first_moment /= norm_;
  return m;
}

double Distribution::squared_error(double a, double b, double center) const {
  return integrate_raw(a, b, [center](double z) { return (z - center) * (z - center); });
}

double Distribution::quantile(double p) const {
  const double probs[] = {p};
  return weighted_quantiles(*this, 1.0, probs).front();
}

double pdf_eval(const Distribution& dist, double z) { return dist.pdf(z); }

CellMoments partial_moments(const Distribution& dist, double a, double b) {
  if (!(a < b)) throw std::invalid_argument("partial_moments: require a < b");
  return dist.moments(a, b);
}

double differential_entropy(const Distribution& dist) {
  if (dist.kind() != Distribution::Kind::Empirical)
    return 0.5 * std::log2(2.0 * kPi * kEuler * dist.stddev() * dist.stddev());
  return dist.integrate(dist.support_lo(), dist.support_hi(), [&](double z) {
    const double f = dist.pdf(z);
    return f > 0.0 ? -std::log2(f) : 0.0;
  });
}

std::vector<double> weighted_quantiles(const Distribution& dist, double power,
                                       std::span<const double> probs) {
  const double lo = dist.support_lo();
  const double hi = dist.support_hi();
  const double width = dist.scale() / dist.quadrature().panels_per_scale;
  const auto panels = std::max<long>(1, static_cast<long>(std::ceil((hi - lo) / width)));
  const double h = (hi - lo) / static_cast<double>(panels);

  // Weighted density g = f^power integrated as ∫ f^(power-1) f dz.
  auto g_over_f = [&](double z) {
    const double f = dist.pdf(z);
    return f > 0.0 ? std::pow(f, power - 1.0) : 0.0;
  };
  std::vector<double> cum(static_cast<std::size_t>(panels) + 1, 0.0);
  for (long p = 0; p < panels; ++p) {
    const double a = lo + h * static_cast<double>(p);
    cum[p + 1] = cum[p] + dist.integrate(a, a + h, g_over_f);
  }
  const double total = cum.back();

  std::vector<double> out;
  out.reserve(probs.size());
  for (double prob : probs) {
    if (!(prob > 0.0 && prob < 1.0))
      throw std::invalid_argument("weighted_quantiles: probabilities must lie in (0, 1)");
    const double target = prob * total;
    auto it = std::lower_bound(cum.begin() + 1, cum.end(), target);
    const auto p = std::min<long>(panels - 1, std::distance(cum.begin() + 1, it));
    double a = lo + h * static_cast<double>(p);
    double b = a + h;
    const double base = cum[p];
    const double left_edge = a;
    for (int it2 = 0; it2 < 80 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it2) {
      const double mid = 0.5 * (a + b);
      if (base + dist.integrate(left_edge, mid, g_over_f) < target)
        a = mid;
      else
        b = mid;
    }
    out.push_back(0.5 * (a + b));
  }
  return out;
}

}  // namespace rcq
