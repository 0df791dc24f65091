#pragma once

// Kernel smoothing of empirical rate curves.
//
// The smoothed rate at t is a convex combination of the empirical rates at
// the grid points b_q, with weights proportional to K((t - b_q) / h).

#include <span>
#include <vector>

#include "panelrate/estimators.hpp"
#include "panelrate/panel_data.hpp"

namespace panelrate {

enum class KernelType { gaussian };

enum class BandwidthRule { fixed, n_pow_tenth, mse_grid_search };

struct KernelConfig {
  KernelType kernel = KernelType::gaussian;
  double bandwidth = 1.0;
  BandwidthRule rule = BandwidthRule::fixed;

  static KernelConfig fixed(double bandwidth);
  /// Bandwidth n^{1/10} for a dataset of n subjects.
  static KernelConfig n_pow_tenth(std::size_t n);

  /// Throws InvalidArgument unless the bandwidth is positive and finite.
  void validate() const;
};

/// Standard normal density.
double gaussian_kernel(double x) noexcept;

/// log K(x) up to an additive constant; only differences are used.
double kernel_log_shape(KernelType kernel, double x) noexcept;

/// Normalised kernel weights of every grid point at time t. The largest
/// log-weight is shifted to zero before exponentiation, so at least one
/// weight is exactly 1 before normalisation and the sum never underflows.
std::vector<double> kernel_weights(const TimeGrid& grid, double t, const KernelConfig& config);
std::vector<double> kernel_weights(std::span<const double> grid, double t, const KernelConfig& config);

/// Smooths an empirical curve at the given evaluation times. Absent grid
/// values take no part in the weighting. Throws EmptyCurve when the raw
/// curve has no estimates.
RateCurve smooth_rate_curve(const RateCurve& raw, const KernelConfig& config,
                            std::span<const double> eval_points);

/// n^{1/10}.
double select_bandwidth_default(std::size_t n);

/// Candidate bandwidth minimising the average squared error of the smoothed
/// estimates against a known truth, evaluated at the truth curve's points.
/// Ties go to the smaller bandwidth.
double select_bandwidth_by_mse(std::span<const double> candidates, const RateCurve& truth,
                               std::span<const RateCurve> estimates);

/// Grid points merged with `mesh` equally spaced points spanning the grid.
std::vector<double> default_eval_points(const TimeGrid& grid, std::size_t mesh);

/// Smoothed curve with pointwise normal-approximation bands.
///
/// The smoothed estimate is a sum of independent per-subject terms
///   a_i(t) = sum_q w_q(t) * I(b_q <= last_i) * (c_iq - r_q) / Y_q
/// (c_iq: subject i's panel rate at b_q, r_q: empirical rate), so its
/// variance is estimated by n/(n-1) * sum_i a_i(t)^2. Lower ends are
/// clamped at zero.
RateCurve smoothed_rate_band(const PanelDataset& dataset, CauseId cause, const KernelConfig& config,
                             std::span<const double> eval_points, double alpha);

/// Sum of absolute successive differences of the present estimates.
double total_variation(const RateCurve& curve);

}  // namespace panelrate
