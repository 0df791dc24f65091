#include "panelrate/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "panelrate/errors.hpp"

namespace panelrate {

namespace {

struct PresentPoints {
  std::vector<double> times;
  std::vector<double> values;
};

PresentPoints present_points(const RateCurve& curve) {
  PresentPoints out;
  for (const auto& p : curve.points) {
    if (!p.estimate) continue;
    out.times.push_back(p.time);
    out.values.push_back(*p.estimate);
  }
  return out;
}

// Smoothed value at t from present points; result is clamped to the range
// of the values so rounding cannot leave the convex hull.
double smooth_at(const PresentPoints& pts, double lo, double hi, double t, const KernelConfig& config) {
  const auto w = kernel_weights(pts.times, t, config);
  double acc = 0.0;
  for (std::size_t q = 0; q < w.size(); ++q) acc += w[q] * pts.values[q];
  return std::clamp(acc, lo, hi);
}

}  // namespace

KernelConfig KernelConfig::fixed(double bandwidth) {
  KernelConfig c{KernelType::gaussian, bandwidth, BandwidthRule::fixed};
  c.validate();
  return c;
}

KernelConfig KernelConfig::n_pow_tenth(std::size_t n) {
  return KernelConfig{KernelType::gaussian, select_bandwidth_default(n), BandwidthRule::n_pow_tenth};
}

void KernelConfig::validate() const {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InvalidArgument("bandwidth must be positive and finite");
  }
}

double gaussian_kernel(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double kernel_log_shape(KernelType kernel, double x) noexcept {
  switch (kernel) {
    case KernelType::gaussian: return -0.5 * x * x;
  }
  return -std::numeric_limits<double>::infinity();
}

std::vector<double> kernel_weights(std::span<const double> grid, double t, const KernelConfig& config) {
  config.validate();
  if (grid.empty()) throw EmptyCurve("cannot weight an empty grid");

  std::vector<double> w(grid.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < grid.size(); ++q) {
    w[q] = kernel_log_shape(config.kernel, (t - grid[q]) / config.bandwidth);
    top = std::max(top, w[q]);
  }
  if (!std::isfinite(top)) throw NumericalUnderflow("every kernel weight vanished at t=" + std::to_string(t));

  double total = 0.0;
  for (auto& x : w) {
    x = std::exp(x - top);
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

std::vector<double> kernel_weights(const TimeGrid& grid, double t, const KernelConfig& config) {
  return kernel_weights(grid.points(), t, config);
}

RateCurve smooth_rate_curve(const RateCurve& raw, const KernelConfig& config,
                            std::span<const double> eval_points) {
  if (raw.tag != EstimatorTag::empirical) {
    throw InvalidArgument("only empirical curves can be smoothed");
  }
  config.validate();
  const auto pts = present_points(raw);
  if (pts.times.empty()) throw EmptyCurve("raw curve has no estimates to smooth");
  const auto [lo, hi] = std::minmax_element(pts.values.begin(), pts.values.end());

  RateCurve out{raw.cause, EstimatorTag::smoothed, {}};
  out.points.reserve(eval_points.size());
  for (double t : eval_points) {
    out.points.push_back({t, smooth_at(pts, *lo, *hi, t, config), std::nullopt, std::nullopt});
  }
  return out;
}

double select_bandwidth_default(std::size_t n) {
  if (n == 0) throw InvalidArgument("sample size must be positive");
  return std::pow(static_cast<double>(n), 0.1);
}

double select_bandwidth_by_mse(std::span<const double> candidates, const RateCurve& truth,
                               std::span<const RateCurve> estimates) {
  if (candidates.empty()) throw EmptyCandidates("no candidate bandwidths");
  if (estimates.empty()) throw InvalidArgument("no simulated estimates to score");

  std::vector<double> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());

  std::vector<double> times;
  std::vector<double> target;
  for (const auto& p : truth.points) {
    if (!p.estimate) continue;
    times.push_back(p.time);
    target.push_back(*p.estimate);
  }
  if (times.empty()) throw EmptyCurve("truth curve has no values");

  double best_h = sorted.front();
  double best_mse = std::numeric_limits<double>::infinity();
  for (double h : sorted) {
    const auto config = KernelConfig::fixed(h);
    double sse = 0.0;
    std::size_t count = 0;
    for (const auto& est : estimates) {
      const auto smoothed = smooth_rate_curve(est, config, times);
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double d = *smoothed.points[k].estimate - target[k];
        sse += d * d;
        ++count;
      }
    }
    const double mse = sse / static_cast<double>(count);
    if (mse < best_mse) {
      best_mse = mse;
      best_h = h;
    }
  }
  return best_h;
}

std::vector<double> default_eval_points(const TimeGrid& grid, std::size_t mesh) {
  if (grid.empty()) throw EmptyCurve("empty grid");
  if (mesh < 2) throw InvalidArgument("mesh size must be at least 2");
  std::vector<double> pts(grid.points().begin(), grid.points().end());
  const double lo = grid.front();
  const double hi = grid.back();
  for (std::size_t k = 0; k < mesh; ++k) {
    pts.push_back(k + 1 == mesh ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(mesh - 1));
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

RateCurve smoothed_rate_band(const PanelDataset& dataset, CauseId cause, const KernelConfig& config,
                             std::span<const double> eval_points, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  const auto raw = empirical_rate_curve(dataset, cause);
  RateCurve out = smooth_rate_curve(raw, config, eval_points);
  const auto segments = panel_segments(dataset, cause);
  const auto grid = dataset.grid().points();
  const std::size_t l = grid.size();

  std::vector<double> y(l, 0.0);
  for (std::size_t last : dataset.last_grid_index()) y[last] += 1.0;
  for (std::size_t q = l - 1; q > 0; --q) y[q - 1] += y[q];

  const double n = static_cast<double>(dataset.num_subjects());
  if (dataset.num_subjects() < 2) return out;
  const double z = normal_quantile(1.0 - alpha / 2.0);

  std::vector<double> u(l + 1), v(l + 1);  // prefix sums, u[q+1] covers b_0..b_q
  for (std::size_t k = 0; k < eval_points.size(); ++k) {
    const auto w = kernel_weights(grid, eval_points[k], config);
    u[0] = v[0] = 0.0;
    for (std::size_t q = 0; q < l; ++q) {
      u[q + 1] = u[q] + w[q] / y[q];
      v[q + 1] = v[q] + w[q] * *raw.points[q].estimate / y[q];
    }
    double sum_sq = 0.0;
    for (const auto& segs : segments) {
      double a = 0.0;
      for (const auto& seg : segs) a += seg.rate * (u[seg.last + 1] - u[seg.first]);
      a -= v[segs.back().last + 1];
      sum_sq += a * a;
    }
    const double se = std::sqrt(n / (n - 1.0) * sum_sq);
    auto& point = out.points[k];
    point.ci_lower = std::max(0.0, *point.estimate - z * se);
    point.ci_upper = *point.estimate + z * se;
  }
  return out;
}

double total_variation(const RateCurve& curve) {
  double tv = 0.0;
  std::optional<double> previous;
  for (const auto& p : curve.points) {
    if (!p.estimate) continue;
    if (previous) tv += std::abs(*p.estimate - *previous);
    previous = p.estimate;
  }
  return tv;
}

}  // namespace panelrate
