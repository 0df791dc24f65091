#include "panelrate/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "panelrate/errors.hpp"

namespace panelrate {

namespace {

void check_cause(const PanelDataset& dataset, CauseId cause) {
  if (cause.index() > dataset.num_causes()) {
    throw InvalidCause("cause " + std::to_string(cause.index()) + " but dataset has " +
                       std::to_string(dataset.num_causes()));
  }
}

std::vector<std::size_t> at_risk_on_grid(const PanelDataset& dataset) {
  const std::size_t l = dataset.grid().size();
  std::vector<std::size_t> y(l, 0);
  for (std::size_t last : dataset.last_grid_index()) ++y[last];
  for (std::size_t q = l - 1; q > 0; --q) y[q - 1] += y[q];
  return y;
}

}  // namespace

const char* to_string(EstimatorTag tag) noexcept {
  switch (tag) {
    case EstimatorTag::empirical: return "empirical";
    case EstimatorTag::jump: return "jump";
    case EstimatorTag::slope: return "slope";
    case EstimatorTag::smoothed: return "smoothed";
  }
  return "unknown";
}

std::vector<double> RateCurve::times() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.time);
  return out;
}

std::vector<std::vector<PanelSegment>> panel_segments(const PanelDataset& dataset, CauseId cause) {
  check_cause(dataset, cause);
  const auto& grid = dataset.grid();
  std::vector<std::vector<PanelSegment>> out;
  out.reserve(dataset.num_subjects());
  for (const auto& s : dataset.subjects()) {
    const auto& counts = s.cum_counts[cause.offset()];
    std::vector<PanelSegment> segs;
    segs.reserve(s.num_obs());
    std::size_t first = 0;
    for (std::size_t p = 0; p < s.num_obs(); ++p) {
      const std::size_t last = grid.index_of(s.obs_times[p]);
      const double t_prev = p == 0 ? 0.0 : s.obs_times[p - 1];
      const std::int64_t n_prev = p == 0 ? 0 : counts[p - 1];
      segs.push_back({first, last, panel_rate(counts[p], n_prev, s.obs_times[p], t_prev)});
      first = last + 1;
    }
    out.push_back(std::move(segs));
  }
  return out;
}

double empirical_rate(const PanelDataset& dataset, CauseId cause, double t) {
  check_cause(dataset, cause);
  if (!(t > 0.0)) throw InvalidArgument("evaluation time must be positive");

  double numerator = 0.0;
  std::size_t at_risk = 0;
  for (const auto& s : dataset.subjects()) {
    if (t > s.last_time()) continue;
    ++at_risk;
    const auto& counts = s.cum_counts[cause.offset()];
    const auto p = static_cast<std::size_t>(
        std::lower_bound(s.obs_times.begin(), s.obs_times.end(), t) - s.obs_times.begin());
    const double t_prev = p == 0 ? 0.0 : s.obs_times[p - 1];
    const std::int64_t n_prev = p == 0 ? 0 : counts[p - 1];
    numerator += panel_rate(counts[p], n_prev, s.obs_times[p], t_prev);
  }
  if (at_risk == 0) throw NoSubjectsAtRisk("no subject is under observation at t=" + std::to_string(t));
  return numerator / static_cast<double>(at_risk);
}

RateCurve empirical_rate_curve(const PanelDataset& dataset, CauseId cause) {
  const auto segments = panel_segments(dataset, cause);
  const auto& grid = dataset.grid();
  const auto y = at_risk_on_grid(dataset);

  std::vector<double> numerator(grid.size(), 0.0);
  for (const auto& segs : segments) {
    for (const auto& seg : segs) {
      for (std::size_t q = seg.first; q <= seg.last; ++q) numerator[q] += seg.rate;
    }
  }

  RateCurve curve{cause, EstimatorTag::empirical, {}};
  curve.points.reserve(grid.size());
  for (std::size_t q = 0; q < grid.size(); ++q) {
    RatePoint point{grid[q], std::nullopt, std::nullopt, std::nullopt};
    if (y[q] > 0) point.estimate = numerator[q] / static_cast<double>(y[q]);
    curve.points.push_back(point);
  }
  return curve;
}

std::vector<double> isotonic_regression(std::span<const double> values,
                                        std::span<const double> weights) {
  if (values.size() != weights.size()) {
    throw InvalidArgument("isotonic_regression: values and weights differ in length");
  }
  struct Block {
    double mean;
    double weight;
    std::size_t size;
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(weights[k] > 0.0)) throw InvalidArgument("isotonic_regression: weights must be positive");
    blocks.push_back({values[k], weights[k], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      const Block top = blocks.back();
      blocks.pop_back();
      Block& below = blocks.back();
      const double w = below.weight + top.weight;
      below.mean = (below.mean * below.weight + top.mean * top.weight) / w;
      below.weight = w;
      below.size += top.size;
    }
  }
  std::vector<double> fit;
  fit.reserve(values.size());
  for (const auto& b : blocks) fit.insert(fit.end(), b.size, b.mean);
  return fit;
}

MeanCurve isotonic_mean_curve(const PanelDataset& dataset, CauseId cause) {
  check_cause(dataset, cause);
  const auto& grid = dataset.grid();
  std::vector<double> sum(grid.size(), 0.0);
  std::vector<double> weight(grid.size(), 0.0);
  for (const auto& s : dataset.subjects()) {
    const auto& counts = s.cum_counts[cause.offset()];
    for (std::size_t p = 0; p < s.num_obs(); ++p) {
      const std::size_t q = grid.index_of(s.obs_times[p]);
      sum[q] += static_cast<double>(counts[p]);
      weight[q] += 1.0;
    }
  }
  std::vector<double> means(grid.size());
  for (std::size_t q = 0; q < grid.size(); ++q) means[q] = sum[q] / weight[q];
  return MeanCurve{cause, grid, isotonic_regression(means, weight)};
}

RateCurve rate_from_mean_jump(const MeanCurve& mean) {
  RateCurve curve{mean.cause, EstimatorTag::jump, {}};
  double previous = 0.0;
  for (std::size_t q = 0; q < mean.grid.size(); ++q) {
    curve.points.push_back({mean.grid[q], mean.values[q] - previous, std::nullopt, std::nullopt});
    previous = mean.values[q];
  }
  return curve;
}

RateCurve rate_from_mean_slope(const MeanCurve& mean) {
  RateCurve curve{mean.cause, EstimatorTag::slope, {}};
  double previous = 0.0;
  double t_prev = 0.0;
  for (std::size_t q = 0; q < mean.grid.size(); ++q) {
    const double slope = (mean.values[q] - previous) / (mean.grid[q] - t_prev);
    curve.points.push_back({mean.grid[q], slope, std::nullopt, std::nullopt});
    previous = mean.values[q];
    t_prev = mean.grid[q];
  }
  return curve;
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

RateCurve rate_confidence_band(const PanelDataset& dataset, CauseId cause, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  RateCurve curve = empirical_rate_curve(dataset, cause);
  const auto segments = panel_segments(dataset, cause);
  const auto y = at_risk_on_grid(dataset);

  std::vector<double> squared_dev(curve.points.size(), 0.0);
  for (const auto& segs : segments) {
    for (const auto& seg : segs) {
      for (std::size_t q = seg.first; q <= seg.last; ++q) {
        const double d = seg.rate - *curve.points[q].estimate;
        squared_dev[q] += d * d;
      }
    }
  }

  const double z = normal_quantile(1.0 - alpha / 2.0);
  for (std::size_t q = 0; q < curve.points.size(); ++q) {
    auto& point = curve.points[q];
    if (!point.estimate || y[q] < 2) continue;
    const double n = static_cast<double>(y[q]);
    const double se = std::sqrt(squared_dev[q] / (n - 1.0) / n);
    point.ci_lower = std::max(0.0, *point.estimate - z * se);
    point.ci_upper = *point.estimate + z * se;
  }
  return curve;
}

PanelDataset merge_causes(const PanelDataset& dataset) {
  std::vector<SubjectRecord> merged;
  merged.reserve(dataset.num_subjects());
  for (const auto& s : dataset.subjects()) {
    SubjectRecord m{s.subject_id, s.obs_times, {std::vector<std::int64_t>(s.num_obs(), 0)}};
    for (const auto& counts : s.cum_counts) {
      for (std::size_t p = 0; p < counts.size(); ++p) m.cum_counts[0][p] += counts[p];
    }
    merged.push_back(std::move(m));
  }
  return PanelDataset::from_subjects(std::move(merged), 1);
}

}  // namespace panelrate
