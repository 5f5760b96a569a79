#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace rcq {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kEuler = 2.71828182845904523536;

// Settings for the composite Gauss-Legendre rule used by every integral.
// The support is truncated at `radius` scale units (stddev for normal
// kinds, kernel bandwidth beyond the sample range for empirical ones).
struct Quadrature {
  double radius = 12.0;
  int nodes = 16;
  double panels_per_scale = 2.0;
};

struct CellMoments {
  double mass = 0.0;
  double first_moment = 0.0;
};

/// Univariate density model for normalized gradient entries.
///
/// Normal kinds integrate the analytic density; the empirical kind is a
/// Gaussian kernel density estimate with Silverman bandwidth.  Densities
/// are renormalized so the truncated support carries unit mass.
class Distribution {
 public:
  enum class Kind { StandardNormal, Normal, Empirical };

  static Distribution standard_normal(Quadrature q = {});
  static Distribution normal(double mean, double stddev, Quadrature q = {});
  static Distribution empirical(std::vector<double> samples, Quadrature q = {});

  Kind kind() const { return kind_; }
  double mean() const { return mean_; }
  double stddev() const { return stddev_; }
  // Kernel bandwidth for Empirical; stddev otherwise.
  double scale() const { return scale_; }
  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }
  const Quadrature& quadrature() const { return quad_; }
  std::span<const double> samples() const { return samples_; }

  double pdf(double z) const;

  // ∫_a^b fn(z) f(z) dz over the truncated support.  Infinite endpoints
  // are allowed and clip to the support.
  double integrate(double a, double b, const std::function<double(double)>& fn) const;
  double mass(double a, double b) const;
  // Mass and first moment in one pass.
  CellMoments moments(double a, double b) const;
  // ∫_a^b (z - center)^2 f(z) dz.
  double squared_error(double a, double b, double center) const;

  // Smallest z with mass(-inf, z) >= p, by bisection on the quadrature CDF.
  double quantile(double p) const;

 private:
  Distribution() = default;
  double raw_pdf(double z) const;
  template <typename Fn>
  double integrate_raw(double a, double b, Fn&& fn) const;
  void finish_setup();

  Kind kind_ = Kind::StandardNormal;
  double mean_ = 0.0;
  double stddev_ = 1.0;
  double scale_ = 1.0;
  double lo_ = -12.0;
  double hi_ = 12.0;
  double norm_ = 1.0;
  Quadrature quad_{};
  const std::pair<std::vector<double>, std::vector<double>>* rule_ = nullptr;
  std::vector<double> samples_;
};

double pdf_eval(const Distribution& dist, double z);

/// Mass and first moment of the density over (a, b].  Throws
/// std::invalid_argument when a >= b.
CellMoments partial_moments(const Distribution& dist, double a, double b);

/// Differential entropy in bits.
double differential_entropy(const Distribution& dist);

/// Gauss-Legendre nodes and weights on [-1, 1].
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n);

/// Quantiles of the density proportional to f(z)^power, used for companded
/// initialization (power = 1/3 is the high-rate Lloyd-Max point density).
std::vector<double> weighted_quantiles(const Distribution& dist, double power,
                                       std::span<const double> probs);

}  // namespace rcq
