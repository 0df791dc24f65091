#pragma once

// Monte Carlo study of the empirical and kernel-smoothed rate estimators.
//
// Data-generating process, per subject:
//   m ~ DiscreteUniform{1, ..., max_panels}
//   gaps g_1..g_m ~ Uniform(0, gap_upper], visit times are partial sums
//   per-panel increments (d1, d2) ~ bivariate Poisson(theta1, theta2, theta3)
// and the cumulative counts are partial sums of the increments.
//
// Randomness: replication r of a design with master seed s draws from its
// own mt19937_64 stream seeded with splitmix64(splitmix64(s) + r), so the
// data of any replication is independent of execution order and thread
// count. Oracle cohorts use the same scheme on a separate seed domain.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/random/mersenne_twister.hpp>

#include "panelrate/panel_data.hpp"

namespace panelrate {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Independent, reproducible random stream.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on (0, upper].
  double uniform_open_closed(double upper);
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  std::int64_t poisson(double mean);

 private:
  boost::random::mt19937_64 engine_;
};

struct BivariatePoissonParams {
  double theta1 = 0.2;
  double theta2 = 0.3;
  double theta3 = 0.5;

  /// Throws InvalidArgument on negative parameters or theta1+theta2+theta3 == 0.
  void validate() const;
  double mean_x() const noexcept { return theta1 + theta3; }
  double mean_y() const noexcept { return theta2 + theta3; }
};

/// Joint pmf P(X = x, Y = y).
double bivariate_poisson_pmf(const BivariatePoissonParams& params, std::int64_t x, std::int64_t y);

/// (U1 + U3, U2 + U3) with independent U_k ~ Poisson(theta_k).
std::pair<std::int64_t, std::int64_t> sample_bivariate_poisson(const BivariatePoissonParams& params,
                                                                RngStream& rng);

enum class IncrementMode {
  per_panel,   // increments independent of the panel length
  gap_scaled,  // increment means multiplied by gap / mean gap
};

enum class StudyEstimator { empirical, smoothed };

const char* to_string(StudyEstimator estimator) noexcept;
const char* to_string(IncrementMode mode) noexcept;

/// Eval times of the empirical-estimator table.
std::vector<double> empirical_table_times();
/// Eval times of the smoothed-estimator table.
std::vector<double> smoothed_table_times();

struct SimDesign {
  std::size_t n = 100;
  std::size_t reps = 1000;
  int max_panels = 10;
  double gap_upper = 5.0;
  BivariatePoissonParams params;
  std::vector<double> eval_times = empirical_table_times();
  std::uint64_t seed = 20211;
  IncrementMode increments = IncrementMode::per_panel;
  /// Half-width of the finite difference used by the truth oracle.
  double oracle_delta = 0.25;

  void validate() const;
};

/// One simulated dataset (J = 2).
PanelDataset generate_panel_dataset(const SimDesign& design, RngStream& rng);

struct OracleEstimate {
  double time = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t at_risk = 0;
  /// (mean increment) / (mean gap): the long-run rate of the process.
  double heuristic = 0.0;
  bool agrees_with_heuristic = false;
};

/// Smallest oracle cohort the study should use.
inline constexpr std::size_t kRecommendedOracleReps = 100'000;

/// Monte Carlo truth r_j(t) = d/dt E[N_j(t)]. Each member of a cohort of
/// `oracle_reps` subjects follows the data-generating process, except that
/// panels keep arriving past the last visit so N_j(t) is defined at every t;
/// N_j is linear inside each panel. The rate is the central difference
///   (mean N(t + delta) - mean N(t - delta)) / (2 delta)
/// with the lower end clamped at the origin. Throws DegenerateAtRisk when
/// fewer than 100 cohort members are still visited at t (the estimators
/// have no information there) and InsufficientReps when the relative
/// standard error exceeds 1%.
std::vector<OracleEstimate> oracle_true_rates(const SimDesign& design, CauseId cause,
                                              std::span<const double> times, std::size_t oracle_reps,
                                              unsigned threads = 0);
OracleEstimate oracle_true_rate(const SimDesign& design, CauseId cause, double t, std::size_t oracle_reps,
                                unsigned threads = 0);

/// truth[cause offset][eval time index].
using TruthTable = std::vector<std::vector<double>>;

TruthTable oracle_truth(const SimDesign& design, std::size_t oracle_reps, unsigned threads = 0);

struct NormalityCheck {
  double mean = 0.0;
  double sd = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double ks_stat = 0.0;
  double ks_pvalue = 0.0;
};

struct ReportCell {
  std::size_t n = 0;
  double t = 0.0;
  int cause = 1;
  double truth = 0.0;
  double abs_bias = 0.0;
  double mse = 0.0;
  std::size_t contributing = 0;
  std::size_t excluded = 0;
  NormalityCheck normality;
};

struct SimulationReport {
  SimDesign design;
  StudyEstimator estimator = StudyEstimator::empirical;
  /// Bandwidth used by the smoothed estimator, 0 for the empirical one.
  double bandwidth = 0.0;
  bool self_truth = false;
  std::vector<ReportCell> cells;

  const ReportCell& cell(double t, int cause) const;
};

/// Runs design.reps replications and compares the estimates with `truth`.
/// Replications with nobody at risk at t are excluded at that t.
SimulationReport run_bias_mse_study(const SimDesign& design, StudyEstimator estimator,
                                    const TruthTable& truth, unsigned threads = 0);

/// Same study with the truth replaced by the across-replication mean of the
/// estimates themselves (smoke testing).
SimulationReport run_bias_mse_study_self_truth(const SimDesign& design, StudyEstimator estimator,
                                               unsigned threads = 0);

enum class CheckStatus { pass, fail, insufficient };

const char* to_string(CheckStatus status) noexcept;

struct ResultCheck {
  std::string name;
  CheckStatus status = CheckStatus::fail;
  /// Per cause: cells meeting the condition and cells examined.
  std::vector<std::pair<std::size_t, std::size_t>> per_cause;
  double required_fraction = 0.0;
  std::string detail;
};

struct AsymptoticSummary {
  ResultCheck unbiasedness;  // absolute bias decreases with n
  ResultCheck consistency;   // MSE decreases with n
  ResultCheck normality;     // KS against fitted normal at the larger n

  bool all_pass() const noexcept;
};

inline constexpr std::size_t kMinNormalityReps = 200;

/// Compares two reports of the same design and estimator at a smaller and
/// a larger sample size. Throws IncompatibleReports otherwise.
AsymptoticSummary check_asymptotic_results(const SimulationReport& small, const SimulationReport& large);

/// Kolmogorov-Smirnov distance between a sample and N(mean, sd^2).
double ks_statistic_normal(std::span<const double> sample, double mean, double sd);
/// Asymptotic Kolmogorov p-value with the small-sample correction
/// lambda = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) * D.
double kolmogorov_pvalue(double d, std::size_t n);

/// Number of worker threads: `requested` if non-zero, else the hardware
/// concurrency, capped by PANELRATE_THREADS when that is a positive integer.
unsigned resolve_threads(unsigned requested);

}  // namespace panelrate
