#pragma once

#include <optional>
#include <span>
#include <vector>

#include "panelrate/panel_data.hpp"

namespace panelrate {

enum class EstimatorTag { empirical, jump, slope, smoothed };

const char* to_string(EstimatorTag tag) noexcept;

struct RatePoint {
  double time = 0.0;
  /// Absent when no subject is at risk at `time`.
  std::optional<double> estimate;
  std::optional<double> ci_lower;
  std::optional<double> ci_upper;
};

/// Rate estimates for one cause over a strictly increasing set of times.
struct RateCurve {
  CauseId cause{1};
  EstimatorTag tag = EstimatorTag::empirical;
  std::vector<RatePoint> points;

  std::vector<double> times() const;
};

/// Non-decreasing estimate of the cumulative mean function of one cause.
struct MeanCurve {
  CauseId cause{1};
  TimeGrid grid;
  std::vector<double> values;
};

/// Grid indices [first, last] covered by one panel of one subject, and the
/// panel's event rate: count increment divided by panel length.
struct PanelSegment {
  std::size_t first = 0;
  std::size_t last = 0;
  double rate = 0.0;
};

/// Rate of one panel (t_prev, t_now] with cumulative counts at both ends.
inline double panel_rate(std::int64_t count_now, std::int64_t count_prev, double t_now,
                         double t_prev) noexcept {
  return static_cast<double>(count_now - count_prev) / (t_now - t_prev);
}

/// For every subject, its panels expressed against the dataset grid.
std::vector<std::vector<PanelSegment>> panel_segments(const PanelDataset& dataset, CauseId cause);

/// Average over subjects at risk at t of the rate of the panel containing t.
/// Throws NoSubjectsAtRisk when nobody is followed up to t.
double empirical_rate(const PanelDataset& dataset, CauseId cause, double t);

/// empirical_rate at every grid point; bitwise equal to pointwise calls.
RateCurve empirical_rate_curve(const PanelDataset& dataset, CauseId cause);

/// Weighted isotonic (non-decreasing) least-squares fit by pool adjacent
/// violators. `weights` must be positive and the same length as `values`.
std::vector<double> isotonic_regression(std::span<const double> values,
                                        std::span<const double> weights);

/// Isotonic fit of every subject's cumulative counts against visit time,
/// evaluated on the pooled grid. Visits sharing a time are averaged.
MeanCurve isotonic_mean_curve(const PanelDataset& dataset, CauseId cause);

/// First differences of the mean curve, with mean 0 at the origin.
RateCurve rate_from_mean_jump(const MeanCurve& mean);

/// First differences divided by grid spacing (origin at time 0); the value
/// at b_q holds on the interval (b_{q-1}, b_q].
RateCurve rate_from_mean_slope(const MeanCurve& mean);

/// Standard normal quantile.
double normal_quantile(double p);

/// Empirical curve with pointwise normal-approximation bands
///   estimate +/- z_{1-alpha/2} * s / sqrt(Y)
/// where s is the sample standard deviation of the panel rates of subjects
/// at risk. The lower end is clamped at zero. Bands are absent where fewer
/// than two subjects are at risk.
RateCurve rate_confidence_band(const PanelDataset& dataset, CauseId cause, double alpha);

/// Dataset with all causes summed into a single cause.
PanelDataset merge_causes(const PanelDataset& dataset);

}  // namespace panelrate
