#include "panelrate/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "panelrate/errors.hpp"
#include "panelrate/estimators.hpp"
#include "panelrate/smoothing.hpp"

namespace panelrate {

namespace {

constexpr std::uint64_t kOracleDomain = 0x6f7261636c652d31ULL;
constexpr std::size_t kOracleBlock = 1u << 16;
constexpr std::size_t kOracleMinAtRisk = 100;
constexpr double kOracleMaxRse = 0.01;
constexpr double kHeuristicTolerance = 0.02;

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// One subject's visits, without the string id, for the hot loops.
struct SimSubject {
  std::vector<double> times;
  std::vector<std::int64_t> counts[2];

  void clear() {
    times.clear();
    counts[0].clear();
    counts[1].clear();
  }
};

void simulate_subject(const SimDesign& design, RngStream& rng, SimSubject& out) {
  out.clear();
  const auto m = rng.uniform_int(1, design.max_panels);
  const double mean_gap = design.gap_upper / 2.0;
  double t = 0.0;
  std::int64_t n1 = 0, n2 = 0;
  for (std::int64_t p = 0; p < m; ++p) {
    const double gap = rng.uniform_open_closed(design.gap_upper);
    const double next = t + gap;
    t = next > t ? next : std::nextafter(t, std::numeric_limits<double>::infinity());
    std::pair<std::int64_t, std::int64_t> d;
    if (design.increments == IncrementMode::per_panel) {
      d = sample_bivariate_poisson(design.params, rng);
    } else {
      const double scale = gap / mean_gap;
      const BivariatePoissonParams scaled{design.params.theta1 * scale, design.params.theta2 * scale,
                                          design.params.theta3 * scale};
      d = sample_bivariate_poisson(scaled, rng);
    }
    n1 += d.first;
    n2 += d.second;
    out.times.push_back(t);
    out.counts[0].push_back(n1);
    out.counts[1].push_back(n2);
  }
}

// Cumulative count at s, linear inside panels, zero at the origin.
double interpolated_count(const SimSubject& s, int cause, double s_time) {
  if (s_time <= 0.0) return 0.0;
  const auto& counts = s.counts[cause];
  const auto p = static_cast<std::size_t>(
      std::lower_bound(s.times.begin(), s.times.end(), s_time) - s.times.begin());
  const double t_prev = p == 0 ? 0.0 : s.times[p - 1];
  const double n_prev = p == 0 ? 0.0 : static_cast<double>(counts[p - 1]);
  const double n_now = static_cast<double>(counts[p]);
  return n_prev + (n_now - n_prev) * (s_time - t_prev) / (s.times[p] - t_prev);
}

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
};

// Subject path for the oracle: the visit count m is drawn as usual, but
// panels keep coming until `horizon` so the counting process is defined
// beyond the last visit. Returns m.
std::int64_t simulate_latent_subject(const SimDesign& design, RngStream& rng, double horizon, SimSubject& out) {
  out.clear();
  const auto m = rng.uniform_int(1, design.max_panels);
  const double mean_gap = design.gap_upper / 2.0;
  double t = 0.0;
  std::int64_t n1 = 0, n2 = 0;
  while (t < horizon) {
    const double gap = rng.uniform_open_closed(design.gap_upper);
    const double next = t + gap;
    t = next > t ? next : std::nextafter(t, std::numeric_limits<double>::infinity());
    std::pair<std::int64_t, std::int64_t> d;
    if (design.increments == IncrementMode::per_panel) {
      d = sample_bivariate_poisson(design.params, rng);
    } else {
      const double scale = gap / mean_gap;
      const BivariatePoissonParams scaled{design.params.theta1 * scale, design.params.theta2 * scale,
                                          design.params.theta3 * scale};
      d = sample_bivariate_poisson(scaled, rng);
    }
    n1 += d.first;
    n2 += d.second;
    out.times.push_back(t);
    out.counts[0].push_back(n1);
    out.counts[1].push_back(n2);
  }
  return m;
}

// oracle[cause][time] for both causes from one cohort.
std::vector<std::vector<OracleEstimate>> oracle_all_causes(const SimDesign& design,
                                                           std::span<const double> times,
                                                           std::size_t oracle_reps, unsigned threads) {
  design.validate();
  if (oracle_reps == 0) throw InsufficientReps("oracle cohort is empty");
  const std::size_t k_times = times.size();
  const std::size_t blocks = (oracle_reps + kOracleBlock - 1) / kOracleBlock;
  const std::uint64_t seed = splitmix64(design.seed ^ kOracleDomain);
  const double delta = design.oracle_delta;
  if (!(delta > 0.0)) throw InvalidArgument("oracle delta must be positive");
  double horizon = 0.0;
  for (double t : times) horizon = std::max(horizon, t + delta);

  // partial[block][cause * k_times + k]; at_risk[block][k]
  std::vector<std::vector<Moments>> partial(blocks, std::vector<Moments>(2 * k_times));
  std::vector<std::vector<std::size_t>> at_risk(blocks, std::vector<std::size_t>(k_times, 0));
  parallel_for(blocks, resolve_threads(threads), [&](std::size_t b) {
    RngStream rng(seed, b);
    SimSubject subject;
    auto& acc = partial[b];
    const std::size_t begin = b * kOracleBlock;
    const std::size_t end = std::min(oracle_reps, begin + kOracleBlock);
    for (std::size_t i = begin; i < end; ++i) {
      const auto m = simulate_latent_subject(design, rng, horizon, subject);
      const double last_visit = subject.times[static_cast<std::size_t>(
          std::min<std::int64_t>(m, static_cast<std::int64_t>(subject.times.size())) - 1)];
      for (std::size_t k = 0; k < k_times; ++k) {
        if (times[k] <= last_visit) ++at_risk[b][k];
        const double hi = times[k] + delta;
        const double lo = std::max(0.0, times[k] - delta);
        for (int c = 0; c < 2; ++c) {
          const double diff = interpolated_count(subject, c, hi) - interpolated_count(subject, c, lo);
          auto& mo = acc[c * k_times + k];
          mo.sum += diff;
          mo.sum_sq += diff * diff;
          ++mo.count;
        }
      }
    }
  });

  std::vector<std::vector<OracleEstimate>> out(2, std::vector<OracleEstimate>(k_times));
  for (int c = 0; c < 2; ++c) {
    const double heuristic =
        (c == 0 ? design.params.mean_x() : design.params.mean_y()) / (design.gap_upper / 2.0);
    for (std::size_t k = 0; k < k_times; ++k) {
      Moments total;
      std::size_t risk = 0;
      for (std::size_t b = 0; b < blocks; ++b) {
        const auto& mo = partial[b][c * k_times + k];
        total.sum += mo.sum;
        total.sum_sq += mo.sum_sq;
        total.count += mo.count;
        risk += at_risk[b][k];
      }
      const double width = times[k] + delta - std::max(0.0, times[k] - delta);
      auto& est = out[c][k];
      est.time = times[k];
      est.at_risk = risk;
      est.heuristic = heuristic;
      if (risk < kOracleMinAtRisk) continue;
      const double n = static_cast<double>(total.count);
      const double mean = total.sum / n;
      const double var = std::max(0.0, (total.sum_sq - n * mean * mean) / (n - 1.0));
      est.value = mean / width;
      est.std_error = std::sqrt(var / n) / width;
      est.agrees_with_heuristic = std::abs(est.value - heuristic) <= kHeuristicTolerance;
    }
  }
  return out;
}

void check_oracle(const OracleEstimate& est, int cause) {
  const std::string where = "cause " + std::to_string(cause) + " at t=" + std::to_string(est.time);
  if (est.at_risk < kOracleMinAtRisk) {
    throw DegenerateAtRisk(where + ": only " + std::to_string(est.at_risk) +
                           " oracle subjects are still observed at t");
  }
  if (est.value > 0.0 && est.std_error / est.value > kOracleMaxRse) {
    throw InsufficientReps(where + ": relative standard error " +
                           std::to_string(est.std_error / est.value) + " exceeds 1%");
  }
}

// estimates[rep][cause * K + k], NaN when excluded.
std::vector<std::vector<double>> replicate(const SimDesign& design, StudyEstimator estimator,
                                           unsigned threads) {
  design.validate();
  const std::size_t k_times = design.eval_times.size();
  const double h = select_bandwidth_default(design.n);
  std::vector<std::vector<double>> estimates(design.reps);
  parallel_for(design.reps, resolve_threads(threads), [&](std::size_t r) {
    RngStream rng(design.seed, r);
    const auto dataset = generate_panel_dataset(design, rng);
    auto& row = estimates[r];
    row.assign(2 * k_times, std::numeric_limits<double>::quiet_NaN());
    for (int c = 0; c < 2; ++c) {
      const CauseId cause(c + 1);
      if (estimator == StudyEstimator::empirical) {
        for (std::size_t k = 0; k < k_times; ++k) {
          if (dataset.at_risk(design.eval_times[k]) == 0) continue;
          row[c * k_times + k] = empirical_rate(dataset, cause, design.eval_times[k]);
        }
      } else {
        std::vector<double> times;
        std::vector<std::size_t> slots;
        for (std::size_t k = 0; k < k_times; ++k) {
          if (dataset.at_risk(design.eval_times[k]) == 0) continue;
          times.push_back(design.eval_times[k]);
          slots.push_back(k);
        }
        if (times.empty()) continue;
        const auto smoothed =
            smooth_rate_curve(empirical_rate_curve(dataset, cause), KernelConfig::fixed(h), times);
        for (std::size_t i = 0; i < slots.size(); ++i) {
          row[c * k_times + slots[i]] = *smoothed.points[i].estimate;
        }
      }
    }
  });
  return estimates;
}

NormalityCheck normality_of(std::vector<double> values) {
  NormalityCheck check;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  check.mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - check.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (values.size() < 2 || m2 <= 0.0) {
    check.sd = values.size() < 2 ? nan : 0.0;
    check.skewness = check.excess_kurtosis = check.ks_stat = check.ks_pvalue = nan;
    return check;
  }
  check.sd = std::sqrt(m2 * n / (n - 1.0));
  check.skewness = m3 / std::pow(m2, 1.5);
  check.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  std::sort(values.begin(), values.end());
  check.ks_stat = ks_statistic_normal(values, check.mean, check.sd);
  check.ks_pvalue = kolmogorov_pvalue(check.ks_stat, values.size());
  return check;
}

SimulationReport aggregate(const SimDesign& design, StudyEstimator estimator,
                           const std::vector<std::vector<double>>& estimates, const TruthTable* truth) {
  const std::size_t k_times = design.eval_times.size();
  SimulationReport report;
  report.design = design;
  report.estimator = estimator;
  report.bandwidth = estimator == StudyEstimator::smoothed ? select_bandwidth_default(design.n) : 0.0;
  report.self_truth = truth == nullptr;

  for (std::size_t k = 0; k < k_times; ++k) {
    for (int c = 0; c < 2; ++c) {
      std::vector<double> values;
      values.reserve(estimates.size());
      for (const auto& row : estimates) {
        const double v = row[c * k_times + k];
        if (!std::isnan(v)) values.push_back(v);
      }
      ReportCell cell;
      cell.n = design.n;
      cell.t = design.eval_times[k];
      cell.cause = c + 1;
      cell.contributing = values.size();
      cell.excluded = design.reps - values.size();
      if (values.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        cell.truth = truth ? (*truth)[c][k] : nan;
        cell.abs_bias = cell.mse = nan;
        cell.normality = {nan, nan, nan, nan, nan, nan};
        report.cells.push_back(cell);
        continue;
      }
      double sum = 0.0;
      for (double v : values) sum += v;
      const double mean = sum / static_cast<double>(values.size());
      cell.truth = truth ? (*truth)[c][k] : mean;
      double ss = 0.0;
      for (double v : values) ss += (v - mean) * (v - mean);
      const double bias = mean - cell.truth;
      cell.abs_bias = std::abs(bias);
      // Variance plus squared bias: equal to the mean squared deviation from
      // the truth, and never below bias^2 after rounding.
      cell.mse = ss / static_cast<double>(values.size()) + bias * bias;
      cell.normality = normality_of(std::move(values));
      report.cells.push_back(cell);
    }
  }
  return report;
}

ResultCheck compare_decrease(const std::string& name, const SimulationReport& small,
                             const SimulationReport& large, double ReportCell::*field) {
  ResultCheck check;
  check.name = name;
  check.required_fraction = 0.7;
  check.per_cause.assign(2, {0, 0});
  for (std::size_t i = 0; i < small.cells.size(); ++i) {
    const auto& a = small.cells[i];
    const auto& b = large.cells[i];
    auto& tally = check.per_cause[a.cause - 1];
    ++tally.second;
    if (b.*field < a.*field) ++tally.first;
  }
  bool ok = true;
  for (std::size_t c = 0; c < check.per_cause.size(); ++c) {
    const auto [hit, total] = check.per_cause[c];
    ok = ok && total > 0 && static_cast<double>(hit) >= check.required_fraction * static_cast<double>(total);
    check.detail += "cause " + std::to_string(c + 1) + ": " + std::to_string(hit) + "/" +
                    std::to_string(total) + (c + 1 < check.per_cause.size() ? "; " : "");
  }
  check.status = ok ? CheckStatus::pass : CheckStatus::fail;
  return check;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : engine_(splitmix64(splitmix64(master_seed) + stream_index)) {}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double RngStream::uniform_open_closed(double upper) { return upper * (1.0 - uniform()); }

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  return boost::random::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
}

std::int64_t RngStream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  return boost::random::poisson_distribution<std::int64_t, double>(mean)(engine_);
}

void BivariatePoissonParams::validate() const {
  for (double th : {theta1, theta2, theta3}) {
    if (!(th >= 0.0) || !std::isfinite(th)) throw InvalidArgument("theta values must be non-negative");
  }
  if (!(theta1 + theta2 + theta3 > 0.0)) throw InvalidArgument("theta1 + theta2 + theta3 must be positive");
}

double bivariate_poisson_pmf(const BivariatePoissonParams& params, std::int64_t x, std::int64_t y) {
  if (x < 0 || y < 0) return 0.0;
  auto log_pois = [](double mean, std::int64_t k) {
    if (mean == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return static_cast<double>(k) * std::log(mean) - mean - std::lgamma(static_cast<double>(k) + 1.0);
  };
  double total = 0.0;
  for (std::int64_t k = 0; k <= std::min(x, y); ++k) {
    total += std::exp(log_pois(params.theta1, x - k) + log_pois(params.theta2, y - k) +
                      log_pois(params.theta3, k));
  }
  return total;
}

std::pair<std::int64_t, std::int64_t> sample_bivariate_poisson(const BivariatePoissonParams& params,
                                                                RngStream& rng) {
  const auto u1 = rng.poisson(params.theta1);
  const auto u2 = rng.poisson(params.theta2);
  const auto u3 = rng.poisson(params.theta3);
  return {u1 + u3, u2 + u3};
}

const char* to_string(StudyEstimator estimator) noexcept {
  return estimator == StudyEstimator::empirical ? "empirical" : "smoothed";
}

const char* to_string(IncrementMode mode) noexcept {
  return mode == IncrementMode::per_panel ? "per_panel" : "gap_scaled";
}

const char* to_string(CheckStatus status) noexcept {
  switch (status) {
    case CheckStatus::pass: return "PASS";
    case CheckStatus::fail: return "FAIL";
    case CheckStatus::insufficient: return "INSUFFICIENT";
  }
  return "?";
}

std::vector<double> empirical_table_times() { return {1, 2, 3, 7, 8, 9, 10, 13, 15, 16}; }
std::vector<double> smoothed_table_times() { return {1, 2, 3, 6, 7, 8, 9, 10, 13, 16}; }

void SimDesign::validate() const {
  if (n < 1) throw InvalidArgument("n must be at least 1");
  if (reps < 1) throw InvalidArgument("reps must be at least 1");
  if (max_panels < 1) throw InvalidArgument("max_panels must be at least 1");
  if (!(gap_upper > 0.0) || !std::isfinite(gap_upper)) throw InvalidArgument("gap_upper must be positive");
  if (eval_times.empty()) throw InvalidArgument("eval_times must not be empty");
  for (double t : eval_times) {
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("eval_times must be positive");
  }
  params.validate();
}

PanelDataset generate_panel_dataset(const SimDesign& design, RngStream& rng) {
  design.validate();
  std::vector<SubjectRecord> subjects;
  subjects.reserve(design.n);
  SimSubject sim;
  for (std::size_t i = 0; i < design.n; ++i) {
    simulate_subject(design, rng, sim);
    subjects.push_back({std::to_string(i + 1), sim.times, {sim.counts[0], sim.counts[1]}});
  }
  return PanelDataset::from_subjects(std::move(subjects), 2);
}

std::vector<OracleEstimate> oracle_true_rates(const SimDesign& design, CauseId cause,
                                              std::span<const double> times, std::size_t oracle_reps,
                                              unsigned threads) {
  if (cause.index() > 2) throw InvalidCause("the simulation design has two causes");
  auto all = oracle_all_causes(design, times, oracle_reps, threads);
  for (const auto& est : all[cause.offset()]) check_oracle(est, cause.index());
  return std::move(all[cause.offset()]);
}

OracleEstimate oracle_true_rate(const SimDesign& design, CauseId cause, double t, std::size_t oracle_reps,
                                unsigned threads) {
  const double times[] = {t};
  return oracle_true_rates(design, cause, times, oracle_reps, threads).front();
}

TruthTable oracle_truth(const SimDesign& design, std::size_t oracle_reps, unsigned threads) {
  const auto all = oracle_all_causes(design, design.eval_times, oracle_reps, threads);
  TruthTable truth(2);
  for (int c = 0; c < 2; ++c) {
    for (const auto& est : all[c]) {
      check_oracle(est, c + 1);
      truth[c].push_back(est.value);
    }
  }
  return truth;
}

const ReportCell& SimulationReport::cell(double t, int cause) const {
  for (const auto& c : cells) {
    if (c.t == t && c.cause == cause) return c;
  }
  throw InvalidArgument("report has no cell at t=" + std::to_string(t));
}

SimulationReport run_bias_mse_study(const SimDesign& design, StudyEstimator estimator,
                                    const TruthTable& truth, unsigned threads) {
  if (truth.size() != 2 || truth[0].size() != design.eval_times.size() ||
      truth[1].size() != design.eval_times.size()) {
    throw InvalidArgument("truth table does not match the design's eval times");
  }
  const auto estimates = replicate(design, estimator, threads);
  return aggregate(design, estimator, estimates, &truth);
}

SimulationReport run_bias_mse_study_self_truth(const SimDesign& design, StudyEstimator estimator,
                                               unsigned threads) {
  const auto estimates = replicate(design, estimator, threads);
  return aggregate(design, estimator, estimates, nullptr);
}

bool AsymptoticSummary::all_pass() const noexcept {
  return unbiasedness.status == CheckStatus::pass && consistency.status == CheckStatus::pass &&
         normality.status == CheckStatus::pass;
}

AsymptoticSummary check_asymptotic_results(const SimulationReport& small, const SimulationReport& large) {
  const auto& a = small.design;
  const auto& b = large.design;
  if (small.estimator != large.estimator) throw IncompatibleReports("reports use different estimators");
  if (a.eval_times != b.eval_times) throw IncompatibleReports("reports use different eval times");
  if (a.params.theta1 != b.params.theta1 || a.params.theta2 != b.params.theta2 ||
      a.params.theta3 != b.params.theta3 || a.increments != b.increments ||
      a.max_panels != b.max_panels || a.gap_upper != b.gap_upper) {
    throw IncompatibleReports("reports come from different data-generating processes");
  }
  if (a.n > b.n) throw IncompatibleReports("first report must have the smaller sample size");
  if (small.cells.size() != large.cells.size()) throw IncompatibleReports("reports differ in shape");

  AsymptoticSummary summary;
  summary.unbiasedness = compare_decrease("absolute bias decreases", small, large, &ReportCell::abs_bias);
  summary.consistency = compare_decrease("MSE decreases", small, large, &ReportCell::mse);

  auto& norm = summary.normality;
  norm.name = "KS normality at level 0.01";
  norm.required_fraction = 0.8;
  norm.per_cause.assign(2, {0, 0});
  bool enough = true;
  for (const auto& cell : large.cells) {
    auto& tally = norm.per_cause[cell.cause - 1];
    ++tally.second;
    if (cell.contributing < kMinNormalityReps) enough = false;
    if (cell.normality.ks_pvalue >= 0.01) ++tally.first;
  }
  bool ok = true;
  for (std::size_t c = 0; c < norm.per_cause.size(); ++c) {
    const auto [hit, total] = norm.per_cause[c];
    ok = ok && total > 0 && static_cast<double>(hit) >= norm.required_fraction * static_cast<double>(total);
    norm.detail += "cause " + std::to_string(c + 1) + ": " + std::to_string(hit) + "/" + std::to_string(total) +
                   (c + 1 < norm.per_cause.size() ? "; " : "");
  }
  if (!enough) {
    norm.status = CheckStatus::insufficient;
    norm.detail += " (fewer than " + std::to_string(kMinNormalityReps) + " replications in some cell)";
  } else {
    norm.status = ok ? CheckStatus::pass : CheckStatus::fail;
  }
  return summary;
}

double ks_statistic_normal(std::span<const double> sample, double mean, double sd) {
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const boost::math::normal_distribution<double> normal(mean, sd);
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = boost::math::cdf(normal, sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double kolmogorov_pvalue(double d, std::size_t n) {
  const double root = std::sqrt(static_cast<double>(n));
  const double lambda = (root + 0.12 + 0.11 / root) * d;
  const double a = -2.0 * lambda * lambda;
  double sum = 0.0;
  double sign = 1.0;
  double previous_term = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * 2.0 * std::exp(a * k * k);
    sum += term;
    if (std::abs(term) <= 1e-3 * previous_term || std::abs(term) <= 1e-8 * sum) return std::clamp(sum, 0.0, 1.0);
    sign = -sign;
    previous_term = std::abs(term);
  }
  return 1.0;
}

unsigned resolve_threads(unsigned requested) {
  unsigned threads = requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PANELRATE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) threads = std::min(threads, static_cast<unsigned>(cap));
  }
  return threads;
}

}  // namespace panelrate
