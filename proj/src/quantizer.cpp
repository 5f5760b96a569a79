#include "rcq/quantizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "rcq/huffman.hpp"

namespace rcq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kClampGap = 1e-9;
constexpr const char* kSpecFormat = "rcq-quantizer";
constexpr int kSpecVersion = 1;

// L2 isotonic regression (pool adjacent violators), then spread pooled
// values so the result is strictly increasing.
std::vector<double> project_increasing(std::span<const double> values) {
  std::vector<double> means;
  std::vector<std::size_t> sizes;
  for (double v : values) {
    means.push_back(v);
    sizes.push_back(1);
    while (means.size() > 1 && means[means.size() - 2] >= means.back()) {
      const std::size_t nb = sizes.back();
      const double mb = means.back();
      means.pop_back();
      sizes.pop_back();
      const std::size_t na = sizes.back();
      means.back() = (means.back() * static_cast<double>(na) + mb * static_cast<double>(nb)) /
                     static_cast<double>(na + nb);
      sizes.back() = na + nb;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t b = 0; b < means.size(); ++b) {
    const double half = 0.5 * static_cast<double>(sizes[b] - 1);
    for (std::size_t i = 0; i < sizes[b]; ++i)
      out.push_back(means[b] + (static_cast<double>(i) - half) * kClampGap);
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    out[i] = std::max(out[i], std::nextafter(out[i - 1], kInf) + kClampGap);
  return out;
}

double objective_mse(std::span<const double> boundaries, std::span<const double> levels,
                     const Distribution& dist) {
  double mse = 0.0;
  for (std::size_t l = 0; l < levels.size(); ++l)
    mse += dist.squared_error(boundaries[l], boundaries[l + 1], levels[l]);
  return mse;
}

std::vector<double> initial_boundaries(const Distribution& dist, std::size_t cells, InitMode init) {
  std::vector<double> probs;
  for (std::size_t k = 1; k < cells; ++k) probs.push_back(static_cast<double>(k) / static_cast<double>(cells));
  const double power = init == InitMode::Companded ? 1.0 / 3.0 : 1.0;
  std::vector<double> u{-kInf};
  if (!probs.empty()) {
    const auto q = weighted_quantiles(dist, power, probs);
    u.insert(u.end(), q.begin(), q.end());
  }
  u.push_back(kInf);
  return u;
}

bool lengths_consistent(std::span<const double> lengths, std::span<const double> probs, LengthMode mode) {
  for (double q : probs)
    if (!(q > 0.0)) return false;
  const auto fresh = length_update(probs, mode);
  for (std::size_t l = 0; l < fresh.size(); ++l)
    if (std::abs(fresh[l] - lengths[l]) > kLengthConsistencyTol) return false;
  return true;
}

}  // namespace

std::string to_string(LengthMode mode) { return mode == LengthMode::Ideal ? "ideal" : "huffman"; }

LengthMode parse_length_mode(const std::string& text) {
  if (text == "ideal") return LengthMode::Ideal;
  if (text == "huffman") return LengthMode::HuffmanInteger;
  throw std::invalid_argument("unknown length mode '" + text + "' (expected ideal|huffman)");
}

std::vector<double> QuantizerSpec::interior_boundaries() const {
  if (boundaries.size() < 2) return {};
  return {boundaries.begin() + 1, boundaries.end() - 1};
}

void QuantizerSpec::validate() const {
  const std::size_t n = levels.size();
  if (bits < 1 || bits > 16) throw std::invalid_argument("QuantizerSpec: bits must lie in [1, 16]");
  if (n == 0 || n > (std::size_t{1} << bits))
    throw std::invalid_argument("QuantizerSpec: cell count must lie in [1, 2^bits]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("QuantizerSpec: lambda must be non-negative");
  if (boundaries.size() != n + 1 || lengths.size() != n || cell_probs.size() != n)
    throw std::invalid_argument("QuantizerSpec: vector sizes disagree");
  if (boundaries.front() != -kInf || boundaries.back() != kInf)
    throw std::invalid_argument("QuantizerSpec: outer boundaries must be -inf and +inf");
  for (std::size_t l = 0; l < n; ++l) {
    if (!(boundaries[l] < boundaries[l + 1]))
      throw std::invalid_argument("QuantizerSpec: boundaries must be strictly increasing");
    if (!(levels[l] > boundaries[l] && levels[l] <= boundaries[l + 1]))
      throw std::invalid_argument("QuantizerSpec: level " + std::to_string(l + 1) + " lies outside its cell");
    if (!(lengths[l] > 0.0) || !std::isfinite(lengths[l]))
      throw std::invalid_argument("QuantizerSpec: codeword lengths must be positive");
    if (!(cell_probs[l] >= 0.0)) throw std::invalid_argument("QuantizerSpec: negative cell probability");
  }
  const double total = std::accumulate(cell_probs.begin(), cell_probs.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("QuantizerSpec: cell probabilities must sum to 1");
}

std::vector<double> cell_probabilities(std::span<const double> boundaries, const Distribution& dist) {
  std::vector<double> p;
  p.reserve(boundaries.size() - 1);
  for (std::size_t l = 0; l + 1 < boundaries.size(); ++l) p.push_back(dist.mass(boundaries[l], boundaries[l + 1]));
  return p;
}

double mse_of(const QuantizerSpec& spec, const Distribution& dist) {
  return objective_mse(spec.boundaries, spec.levels, dist);
}

double rate_of(const QuantizerSpec& spec, const Distribution& dist) {
  const auto p = cell_probabilities(spec.boundaries, dist);
  double r = 0.0;
  for (std::size_t l = 0; l < p.size(); ++l) r += spec.lengths[l] * p[l];
  return r;
}

std::vector<double> lloyd_level_update(std::span<const double> boundaries, const Distribution& dist) {
  if (boundaries.size() < 2) throw std::invalid_argument("lloyd_level_update: need at least one cell");
  std::vector<double> s;
  s.reserve(boundaries.size() - 1);
  for (std::size_t l = 0; l + 1 < boundaries.size(); ++l) {
    const double a = boundaries[l];
    const double b = boundaries[l + 1];
    if (!(a < b)) throw std::invalid_argument("lloyd_level_update: boundaries must be strictly increasing");
    const CellMoments m = dist.moments(a, b);
    if (m.mass >= kEmptyCellMass) {
      // Quadrature can land a hair outside a very narrow cell.
      s.push_back(std::clamp(m.first_moment / m.mass, std::nextafter(a, kInf), b));
    } else if (std::isfinite(a) && std::isfinite(b)) {
      s.push_back(0.5 * (a + b));
    } else if (std::isfinite(a)) {
      s.push_back(std::nextafter(a, kInf));
    } else if (std::isfinite(b)) {
      s.push_back(b);
    } else {
      s.push_back(dist.mean());
    }
  }
  return s;
}

BoundaryUpdate rc_boundary_update(std::span<const double> levels, std::span<const double> lengths,
                                  double lambda) {
  if (levels.empty() || levels.size() != lengths.size())
    throw std::invalid_argument("rc_boundary_update: levels and lengths must be non-empty and equal in size");
  for (std::size_t l = 1; l < levels.size(); ++l)
    if (!(levels[l] > levels[l - 1]))
      throw std::invalid_argument("rc_boundary_update: levels must be strictly increasing");

  std::vector<double> interior;
  interior.reserve(levels.size() - 1);
  for (std::size_t l = 1; l < levels.size(); ++l) {
    const double mid = 0.5 * (levels[l] + levels[l - 1]);
    interior.push_back(mid + 0.5 * lambda * (lengths[l] - lengths[l - 1]) / (levels[l] - levels[l - 1]));
  }
  BoundaryUpdate out;
  bool crossed = false;
  for (std::size_t i = 1; i < interior.size(); ++i) crossed = crossed || !(interior[i] > interior[i - 1]);
  if (crossed) {
    interior = project_increasing(interior);
    out.clamp_events = 1;
  }
  out.boundaries.reserve(levels.size() + 1);
  out.boundaries.push_back(-kInf);
  out.boundaries.insert(out.boundaries.end(), interior.begin(), interior.end());
  out.boundaries.push_back(kInf);
  return out;
}

std::vector<double> length_update(std::span<const double> probs, LengthMode mode) {
  if (probs.empty()) throw std::invalid_argument("length_update: empty probability vector");
  if (probs.size() == 1) return {1.0};
  for (double p : probs)
    if (!(p > 0.0)) throw std::invalid_argument("length_update: zero-probability cell must be merged first");
  std::vector<double> out;
  out.reserve(probs.size());
  if (mode == LengthMode::Ideal) {
    for (double p : probs) out.push_back(-std::log2(p));
  } else {
    const auto book = build_codebook(probs);
    for (int len : book.lengths()) out.push_back(static_cast<double>(len));
  }
  return out;
}

int merge_empty_cells(std::vector<double>& boundaries, const Distribution& dist) {
  int merges = 0;
  while (boundaries.size() > 2) {
    const auto p = cell_probabilities(boundaries, dist);
    std::size_t i = 0;
    while (i < p.size() && p[i] >= kEmptyCellMass && boundaries[i + 1] - boundaries[i] > kCollapsedCellWidth) ++i;
    if (i == p.size()) break;
    bool merge_left;
    if (i == 0)
      merge_left = false;
    else if (i + 1 == p.size())
      merge_left = true;
    else
      merge_left = p[i - 1] <= p[i + 1];
    // Cell i spans (u_i, u_{i+1}]; dropping the shared edge joins it to the neighbour.
    const std::size_t edge = merge_left ? i : i + 1;
    boundaries.erase(boundaries.begin() + static_cast<std::ptrdiff_t>(edge));
    ++merges;
  }
  return merges;
}

Design design_quantizer(const Distribution& dist, int bits, double lambda, const DesignOptions& opts) {
  if (bits < 1 || bits > 16) throw std::invalid_argument("design_quantizer: bits must lie in [1, 16]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("design_quantizer: lambda must be finite and non-negative");
  const std::size_t max_cells = std::size_t{1} << bits;
  const std::size_t cells = opts.initial_cells == 0 ? max_cells : opts.initial_cells;
  if (cells > max_cells) throw std::invalid_argument("design_quantizer: initial cells exceed 2^bits");

  std::vector<double> u = initial_boundaries(dist, cells, opts.init);
  std::vector<double> s, lengths, p;
  Design out;
  DesignReport& rep = out.report;
  double prev_objective = std::numeric_limits<double>::quiet_NaN();

  for (int it = 1; it <= opts.max_iters; ++it) {
    const int merges = merge_empty_cells(u, dist);
    s = lloyd_level_update(u, dist);
    lengths = length_update(cell_probabilities(u, dist), opts.mode);
    BoundaryUpdate upd = rc_boundary_update(s, lengths, lambda);
    u = std::move(upd.boundaries);

    p = cell_probabilities(u, dist);
    const double mse = objective_mse(u, s, dist);
    double rate = 0.0;
    for (std::size_t l = 0; l < p.size(); ++l) rate += lengths[l] * p[l];
    const double objective = mse + lambda * rate;

    rep.iterations = it;
    rep.mse = mse;
    rep.rate = rate;
    rep.objective = objective;
    rep.clamp_events += upd.clamp_events;
    rep.merge_events += merges;
    rep.trace.push_back({objective, upd.clamp_events > 0, merges > 0});

    const bool quiet = upd.clamp_events == 0 && merges == 0;
    if (quiet && std::isfinite(prev_objective) &&
        std::abs(objective - prev_objective) <= opts.tol * std::max(std::abs(objective), 1e-300) &&
        lengths_consistent(lengths, p, opts.mode)) {
      rep.converged = true;
      break;
    }
    prev_objective = objective;
  }

  rep.final_cells = s.size();
  out.spec.bits = bits;
  out.spec.lambda = lambda;
  out.spec.mode = opts.mode;
  out.spec.levels = std::move(s);
  out.spec.boundaries = std::move(u);
  out.spec.lengths = std::move(lengths);
  out.spec.cell_probs = std::move(p);
  return out;
}

TargetRateDesign design_for_target_rate(const Distribution& dist, int bits, double target_rate,
                                        const TargetRateOptions& opts) {
  if (!(target_rate > 0.0)) throw std::invalid_argument("design_for_target_rate: target rate must be positive");
  const std::size_t max_cells = std::size_t{1} << bits;

  auto run = [&](double lambda, std::size_t cells) {
    DesignOptions d = opts.design;
    d.initial_cells = cells;
    Design res = design_quantizer(dist, bits, lambda, d);
    return TargetRateDesign{std::move(res.spec), std::move(res.report), lambda};
  };
  auto in_window = [&](const TargetRateDesign& d) {
    return d.report.rate <= target_rate && d.report.rate >= target_rate - opts.epsilon;
  };

  {
    TargetRateDesign unconstrained = run(0.0, max_cells);
    if (unconstrained.report.rate <= target_rate) return unconstrained;
  }

  std::optional<TargetRateDesign> fallback;
  double best_rate = std::numeric_limits<double>::infinity();
  const std::size_t min_cells =
      max_cells > opts.max_cell_fallbacks + 2 ? max_cells - opts.max_cell_fallbacks : std::size_t{2};

  for (std::size_t cells = max_cells; cells >= min_cells && cells >= 2; --cells) {
    double lo = 0.0;
    double hi = opts.lambda_max;
    TargetRateDesign best = run(hi, cells);
    best_rate = std::min(best_rate, best.report.rate);
    for (int k = 0; k < opts.max_doublings && best.report.rate > target_rate; ++k) {
      lo = hi;
      hi *= 2.0;
      best = run(hi, cells);
      best_rate = std::min(best_rate, best.report.rate);
    }
    if (best.report.rate > target_rate) continue;

    while (!in_window(best) && hi - lo > opts.lambda_tol) {
      const double mid = 0.5 * (lo + hi);
      TargetRateDesign d = run(mid, cells);
      if (d.report.rate > target_rate) {
        lo = mid;
      } else {
        hi = mid;
        best = std::move(d);
      }
    }
    if (in_window(best)) return best;
    if (!fallback || best.report.rate > fallback->report.rate) fallback = std::move(best);
  }
  if (fallback) return *std::move(fallback);
  throw InfeasibleRate(target_rate, best_rate);
}

std::uint32_t quantize(const QuantizerSpec& spec, double z) {
  const auto first = spec.boundaries.begin() + 1;
  const auto last = spec.boundaries.end() - 1;
  return static_cast<std::uint32_t>(std::distance(first, std::lower_bound(first, last, z))) + 1;
}

double dequantize(const QuantizerSpec& spec, std::uint32_t symbol) {
  if (symbol < 1 || symbol > spec.levels.size())
    throw std::out_of_range("dequantize: symbol " + std::to_string(symbol) + " outside [1, " +
                            std::to_string(spec.levels.size()) + "]");
  return spec.levels[symbol - 1];
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  // from_chars does not accept a leading '+'.
  if (begin != end && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end) throw std::invalid_argument("cannot parse double from '" + text + "'");
  return v;
}

nlohmann::json to_json(const QuantizerSpec& spec) {
  auto encode_all = [](std::span<const double> values) {
    nlohmann::json arr = nlohmann::json::array();
    for (double v : values) arr.push_back(format_double(v));
    return arr;
  };
  nlohmann::json doc;
  doc["format"] = kSpecFormat;
  doc["version"] = kSpecVersion;
  doc["b"] = spec.bits;
  doc["lambda"] = format_double(spec.lambda);
  doc["mode"] = to_string(spec.mode);
  doc["s"] = encode_all(spec.levels);
  doc["u_interior"] = encode_all(spec.interior_boundaries());
  doc["lengths"] = encode_all(spec.lengths);
  doc["cell_probs"] = encode_all(spec.cell_probs);
  return doc;
}

QuantizerSpec quantizer_from_json(const nlohmann::json& doc) {
  if (doc.value("format", std::string{}) != kSpecFormat)
    throw std::invalid_argument("quantizer JSON: unexpected format tag");
  if (doc.value("version", 0) != kSpecVersion)
    throw std::invalid_argument("quantizer JSON: unsupported version");
  auto decode_all = [&](const char* key) {
    std::vector<double> out;
    for (const auto& v : doc.at(key)) out.push_back(parse_double(v.get<std::string>()));
    return out;
  };
  QuantizerSpec spec;
  spec.bits = doc.at("b").get<int>();
  spec.lambda = parse_double(doc.at("lambda").get<std::string>());
  spec.mode = parse_length_mode(doc.at("mode").get<std::string>());
  spec.levels = decode_all("s");
  spec.boundaries = {-kInf};
  const auto interior = decode_all("u_interior");
  spec.boundaries.insert(spec.boundaries.end(), interior.begin(), interior.end());
  spec.boundaries.push_back(kInf);
  spec.lengths = decode_all("lengths");
  spec.cell_probs = decode_all("cell_probs");
  spec.validate();
  return spec;
}

}  // namespace rcq
