// Acceptance suite: one PASS/FAIL line per criterion, details indented
// underneath. Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "panelrate/cli.hpp"
#include "panelrate/estimators.hpp"
#include "panelrate/panel_data.hpp"
#include "panelrate/simulation.hpp"
#include "panelrate/smoothing.hpp"

using namespace panelrate;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
  }
  void note(const std::string& what) { notes.push_back("      " + what); }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

bool report(int id, const std::string& title, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o = body();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_s > 0) o.require(secs < limit_s, fmt("runtime %.1f s (limit %.0f s)", secs, limit_s));
  std::printf("%s  criterion %d: %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str());
  for (const auto& n : o.notes) std::printf("        %s\n", n.c_str());
  std::fflush(stdout);
  return o.pass;
}

// ---------------------------------------------------------------- 1

// Product form of the joint pmf, kept separate from the library's own
// convolution form.
double pmf_product_form(double t1, double t2, double t3, int x, int y) {
  double sum = 0.0;
  for (int k = 0; k <= std::min(x, y); ++k) {
    const double log_binoms = std::lgamma(x + 1.0) - std::lgamma(k + 1.0) - std::lgamma(x - k + 1.0) +
                              std::lgamma(y + 1.0) - std::lgamma(k + 1.0) - std::lgamma(y - k + 1.0);
    sum += std::exp(log_binoms + std::lgamma(k + 1.0) + k * std::log(t3 / (t1 * t2)));
  }
  return std::exp(-(t1 + t2 + t3) + x * std::log(t1) - std::lgamma(x + 1.0) + y * std::log(t2) -
                  std::lgamma(y + 1.0)) *
         sum;
}

Outcome sampler_fidelity() {
  Outcome o;
  const BivariatePoissonParams p{0.2, 0.3, 0.5};
  RngStream rng(SimDesign{}.seed, 0);
  const int draws = 1000000;
  double sx = 0, sy = 0, sxy = 0;
  std::map<std::pair<long, long>, long> counts;
  for (int i = 0; i < draws; ++i) {
    const auto [x, y] = sample_bivariate_poisson(p, rng);
    sx += static_cast<double>(x);
    sy += static_cast<double>(y);
    sxy += static_cast<double>(x) * static_cast<double>(y);
    ++counts[{x, y}];
  }
  const double mx = sx / draws, my = sy / draws;
  const double cov = (sxy - draws * mx * my) / (draws - 1.0);
  o.require(std::abs(mx - 0.7) <= 0.005, fmt("mean X = %.5f (0.7 +/- 0.005)", mx));
  o.require(std::abs(my - 0.8) <= 0.005, fmt("mean Y = %.5f (0.8 +/- 0.005)", my));
  o.require(std::abs(cov - 0.5) <= 0.005, fmt("cov(X,Y) = %.5f (0.5 +/- 0.005)", cov));

  double chi2 = 0.0, rest_e = draws, rest_o = draws;
  int cells = 0;
  for (int x = 0; x < 30; ++x) {
    for (int y = 0; y < 30; ++y) {
      const double e = draws * pmf_product_form(0.2, 0.3, 0.5, x, y);
      if (e < 5.0) continue;
      const auto it = counts.find({x, y});
      const double obs = it == counts.end() ? 0.0 : static_cast<double>(it->second);
      chi2 += (obs - e) * (obs - e) / e;
      rest_e -= e;
      rest_o -= obs;
      ++cells;
    }
  }
  chi2 += (rest_o - rest_e) * (rest_o - rest_e) / rest_e;
  const int df = cells;  // cells plus the pooled remainder, minus one
  const double crit = boost::math::quantile(boost::math::chi_squared(df), 0.999);
  o.require(chi2 < crit, fmt("chi-square %.2f on %d df, critical value %.2f at level 0.001", chi2, df, crit));
  return o;
}

// ---------------------------------------------------------------- 2

Outcome kernel_suite() {
  Outcome o;
  o.require(std::abs(gaussian_kernel(0.0) - 0.3989423) <= 1e-7, fmt("K(0) = %.9f", gaussian_kernel(0.0)));

  std::mt19937_64 gen(2);
  std::uniform_int_distribution<int> size(1, 80);
  std::uniform_real_distribution<double> log_h(-3.0, 4.0), gap(0.01, 6.0), unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> grid;
    double t = 100.0 * unit(gen);
    for (int q = size(gen); q > 0; --q) grid.push_back(t += gap(gen));
    const double at = grid.front() - 30 + (grid.back() - grid.front() + 60) * unit(gen);
    double sum = 0.0;
    for (double w : kernel_weights(grid, at, KernelConfig::fixed(std::pow(10.0, log_h(gen))))) sum += w;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  o.require(worst < 1e-12, fmt("max |sum w - 1| over 10^4 random (grid, t, h) = %.2e", worst));

  double local_err = 0.0, flat_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> grid, values;
    double t = 0.0;
    for (int q = 2 + trial % 30; q > 0; --q) {
      grid.push_back(t += 1.0 + gap(gen));  // separation >= 1, far above h below
      values.push_back(0.05 + 2.0 * unit(gen));
    }
    RateCurve raw{CauseId(1), EstimatorTag::empirical, {}};
    double mean = 0.0;
    for (std::size_t q = 0; q < grid.size(); ++q) {
      raw.points.push_back({grid[q], values[q], {}, {}});
      mean += values[q] / static_cast<double>(grid.size());
    }
    const double span = grid.back() - grid.front();
    const auto local = smooth_rate_curve(raw, KernelConfig::fixed(1e-4 * span), grid);
    for (std::size_t q = 0; q < grid.size(); ++q) {
      local_err = std::max(local_err, std::abs(*local.points[q].estimate - values[q]) / values[q]);
    }
    const auto mesh = default_eval_points(TimeGrid(grid), 50);
    const auto flat = smooth_rate_curve(raw, KernelConfig::fixed(1e6 * span), mesh);
    for (const auto& p : flat.points) flat_err = std::max(flat_err, std::abs(*p.estimate - mean));
  }
  o.require(local_err <= 1e-6, fmt("locality, h = 1e-4 x span: max relative error %.2e", local_err));
  o.require(flat_err <= 1e-6, fmt("flattening, h = 1e6 x span: max error %.2e", flat_err));
  return o;
}

// ---------------------------------------------------------------- 3

PanelDataset random_dataset(std::mt19937_64& gen, int subjects, int causes) {
  std::uniform_int_distribution<int> visits(1, 8);
  std::uniform_real_distribution<double> gap(0.05, 4.0);
  std::poisson_distribution<int> inc(1.3);
  std::vector<SubjectRecord> out;
  for (int i = 0; i < subjects; ++i) {
    SubjectRecord s{std::to_string(i), {}, std::vector<std::vector<std::int64_t>>(causes)};
    double t = 0.0;
    std::vector<std::int64_t> c(causes, 0);
    for (int p = visits(gen); p > 0; --p) {
      s.obs_times.push_back(t += std::round(gap(gen) * 4.0) / 4.0 + 0.25);
      for (int j = 0; j < causes; ++j) s.cum_counts[j].push_back(c[j] += inc(gen));
    }
    out.push_back(std::move(s));
  }
  return PanelDataset::from_subjects(std::move(out), causes);
}

// Exact isotonic fit by scanning every split into contiguous blocks.
std::vector<double> isotonic_oracle(const std::vector<double>& y, const std::vector<double>& w) {
  const std::size_t n = y.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_fit;
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<double> fit(n);
    std::size_t start = 0;
    double last = -std::numeric_limits<double>::infinity();
    bool monotone = true;
    for (std::size_t k = 0; k < n; ++k) {
      if (k + 1 != n && !(mask >> k & 1u)) continue;
      double sw = 0, swy = 0;
      for (std::size_t q = start; q <= k; ++q) {
        sw += w[q];
        swy += w[q] * y[q];
      }
      const double level = swy / sw;
      monotone = monotone && level >= last;
      last = level;
      for (std::size_t q = start; q <= k; ++q) fit[q] = level;
      start = k + 1;
    }
    if (!monotone) continue;
    double sse = 0;
    for (std::size_t q = 0; q < n; ++q) sse += w[q] * (y[q] - fit[q]) * (y[q] - fit[q]);
    if (sse < best) {
      best = sse;
      best_fit = fit;
    }
  }
  return best_fit;
}

Outcome estimator_oracles() {
  Outcome o;
  // A: times [2] counts [4]; B: times [4] counts [2]. At t=3 only B is
  // followed, rate 2/4. At t=2 both: (4/2 + 2/4) / 2.
  const auto fixture = PanelDataset::from_subjects({{"A", {2}, {{4}}}, {"B", {4}, {{2}}}}, 1);
  const double hand_t3 = (2.0 / 4.0) / 1.0;
  const double hand_t2 = (4.0 / 2.0 + 2.0 / 4.0) / 2.0;
  const auto curve = empirical_rate_curve(fixture, CauseId(1));
  const bool fixture_ok = empirical_rate(fixture, CauseId(1), 3.0) == hand_t3 &&
                          *curve.points[0].estimate == hand_t2 && *curve.points[1].estimate == hand_t3;
  o.require(fixture_ok, fmt("two-subject fixture: r(3) = %.17g, curve [%.17g, %.17g]",
                            empirical_rate(fixture, CauseId(1), 3.0), *curve.points[0].estimate,
                            *curve.points[1].estimate));

  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> len(1, 6);
  std::uniform_real_distribution<double> val(-5, 5), wt(0.1, 3);
  double pava_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(gen);
    std::vector<double> y(n), w(n);
    for (int k = 0; k < n; ++k) {
      y[k] = trial % 2 ? std::round(val(gen)) : val(gen);
      w[k] = trial % 3 ? wt(gen) : 1.0;
    }
    const auto fit = isotonic_regression(y, w);
    const auto ref = isotonic_oracle(y, w);
    for (int k = 0; k < n; ++k) pava_err = std::max(pava_err, std::abs(fit[k] - ref[k]));
  }
  o.require(pava_err <= 1e-9, fmt("PAVA vs exhaustive search, 200 instances: max error %.2e", pava_err));

  double recon_ulps = 0.0, additivity_ulps = 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int trial = 0; trial < 100; ++trial) {
    const auto ds = random_dataset(gen, 30, 3);
    for (int j = 1; j <= 3; ++j) {
      const auto mean = isotonic_mean_curve(ds, CauseId(j));
      const auto jumps = rate_from_mean_jump(mean);
      double total = 0.0;
      for (std::size_t q = 0; q < mean.values.size(); ++q) {
        total += *jumps.points[q].estimate;
        recon_ulps = std::max(recon_ulps, std::abs(total - mean.values[q]) / (eps * std::max(1.0, mean.values.back())));
      }
    }
    const auto merged = empirical_rate_curve(merge_causes(ds), CauseId(1));
    std::vector<RateCurve> parts;
    for (int j = 1; j <= 3; ++j) parts.push_back(empirical_rate_curve(ds, CauseId(j)));
    for (std::size_t q = 0; q < merged.points.size(); ++q) {
      double sum = 0.0;
      for (const auto& c : parts) sum += *c.points[q].estimate;
      const double all = *merged.points[q].estimate;
      additivity_ulps = std::max(additivity_ulps, std::abs(sum - all) / (eps * std::max(1.0, all)));
    }
  }
  o.require(recon_ulps <= 16, fmt("cumulated jumps vs mean curve: max %.1f ulp", recon_ulps));
  o.require(additivity_ulps <= 16, fmt("sum of cause rates vs merged-cause rate, 100 datasets: max %.1f ulp",
                                       additivity_ulps));
  return o;
}

// ---------------------------------------------------------------- 4, 5

struct ReferenceCell {
  double t;
  double bias1, mse1, bias2, mse2;
};

// n = 500 rows of the published tables.
const std::vector<ReferenceCell> kEmpiricalTable500 = {
    {1, 0.0512, 0.0031, 0.0523, 0.0274},  {2, 0.0029, 0.0003, 0.0359, 0.0130},
    {3, 0.0195, 0.0006, 0.0239, 0.0584},  {7, 0.0251, 0.0013, 0.0288, 0.0012},
    {8, 0.0038, 0.0006, 0.0099, 0.0093},  {9, 0.0097, 0.0006, 0.0343, 0.0014},
    {10, 0.0287, 0.0016, 0.0404, 0.0018}, {13, 0.0372, 0.0023, 0.0181, 0.0016},
    {15, 0.0517, 0.0037, 0.0643, 0.0091}, {16, 0.0587, 0.0044, 0.0113, 0.0130},
};
const std::vector<ReferenceCell> kSmoothedTable500 = {
    {1, 0.0462, 0.0023, 0.0521, 0.0272},  {2, 0.0025, 0.0003, 0.0381, 0.0146},
    {3, 0.0023, 0.0001, 0.0308, 0.0095},  {6, 0.0044, 0.0002, 0.0073, 0.0054},
    {7, 0.0012, 0.0002, 0.0030, 0.0010},  {8, 0.0040, 0.0002, 0.0015, 0.0003},
    {9, 0.0161, 0.0004, 0.0291, 0.0009},  {10, 0.0077, 0.0002, 0.0062, 0.0039},
    {13, 0.0036, 0.0003, 0.0036, 0.0016}, {16, 0.0180, 0.0005, 0.0018, 0.0094},
};

constexpr std::size_t kOracleReps = 2'000'000;

struct Study {
  StudyEstimator estimator;
  std::vector<SimulationReport> reports;  // n = 100, 200, 500
  AsymptoticSummary summary;
  double seconds = 0.0;
};

Study run_study(StudyEstimator estimator) {
  const auto start = std::chrono::steady_clock::now();
  SimDesign design;  // default design: per-panel increments, seed 20211
  design.eval_times = estimator == StudyEstimator::empirical ? empirical_table_times() : smoothed_table_times();
  const auto truth = oracle_truth(design, kOracleReps);
  Study s{estimator, {}, {}, 0.0};
  for (std::size_t n : {100, 200, 500}) {
    design.n = n;
    s.reports.push_back(run_bias_mse_study(design, estimator, truth));
  }
  s.summary = check_asymptotic_results(s.reports.front(), s.reports.back());
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return s;
}

std::string tally(const ResultCheck& c) { return c.name + " [" + c.detail + "]"; }

Outcome scaling(const std::vector<Study>& studies) {
  Outcome o;
  double seconds = 0.0;
  std::size_t within = 0, compared = 0;
  std::vector<std::string> excursions;
  for (const auto& s : studies) {
    const char* name = to_string(s.estimator);
    seconds += s.seconds;
    o.require(s.summary.unbiasedness.status == CheckStatus::pass,
              std::string(name) + ": " + tally(s.summary.unbiasedness) + " n=100 -> 500, need 70% per cause");
    o.require(s.summary.consistency.status == CheckStatus::pass,
              std::string(name) + ": " + tally(s.summary.consistency) + " n=100 -> 500, need 70% per cause");
    const auto& table = s.estimator == StudyEstimator::empirical ? kEmpiricalTable500 : kSmoothedTable500;
    const auto& large = s.reports.back();
    for (const auto& row : table) {
      for (int cause = 1; cause <= 2; ++cause) {
        const auto& cell = large.cell(row.t, cause);
        const double ref[2] = {cause == 1 ? row.bias1 : row.bias2, cause == 1 ? row.mse1 : row.mse2};
        const double ours[2] = {cell.abs_bias, cell.mse};
        const char* metric[2] = {"|bias|", "MSE"};
        for (int m = 0; m < 2; ++m) {
          ++compared;
          const double ratio = ours[m] / ref[m];
          if (ratio >= 0.2 && ratio <= 5.0) {
            ++within;
          } else {
            excursions.push_back(fmt("%s t=%g cause %d %s: ours %.4f, published %.4f (x%.2f)", name, row.t,
                                     cause, metric[m], ours[m], ref[m], ratio));
          }
        }
      }
    }
  }
  o.require(excursions.empty(),
            fmt("n=500 magnitudes within a factor of 5 of the published cells: %zu of %zu", within, compared));
  for (const auto& e : excursions) o.note("excursion: " + e);
  for (const auto& s : studies) {
    const auto& a = s.reports.front().cell(s.reports.front().design.eval_times.front(), 1);
    const auto& b = s.reports[1].cell(a.t, 1);
    const auto& c = s.reports[2].cell(a.t, 1);
    o.note(fmt("%s cause 1 t=%g MSE n=100/200/500: %.4f %.4f %.4f", to_string(s.estimator), a.t, a.mse, b.mse,
               c.mse));
  }
  o.require(seconds < 900.0, fmt("study runtime %.1f s (limit 900 s)", seconds));
  o.note(fmt("design: per-panel increments, seed %llu, reps 1000, oracle cohort %zu, delta 0.25",
             static_cast<unsigned long long>(SimDesign{}.seed), kOracleReps));
  return o;
}

Outcome asymptotics(const std::vector<Study>& studies) {
  Outcome o;
  for (const auto& s : studies) {
    const auto& sum = s.summary;
    if (s.estimator == StudyEstimator::smoothed) {
      // the asymptotic results are statements about the kernel estimator
      for (const auto* r : {&sum.unbiasedness, &sum.consistency, &sum.normality}) {
        o.require(r->status == CheckStatus::pass, std::string("smoothed: ") + to_string(r->status) + " " + tally(*r));
      }
      double worst_skew = 0.0;
      for (const auto& c : s.reports.back().cells) worst_skew = std::max(worst_skew, std::abs(c.normality.skewness));
      o.note(fmt("smoothed n=500: largest |skewness| across cells %.2f", worst_skew));
    } else {
      for (const auto* r : {&sum.unbiasedness, &sum.consistency, &sum.normality}) {
        o.note(std::string("(for reference) empirical: ") + to_string(r->status) + " " + tally(*r));
      }
    }
  }
  return o;
}

// ---------------------------------------------------------------- 6, 7

struct CliRun {
  int code;
  std::string out;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "panelrate");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return {code, out.str()};
}

const std::string kSkin = PANELRATE_DATA_DIR "/skin_cancer_synthetic.csv";

Outcome real_data() {
  Outcome o;
  const auto v = cli({"validate", "--input", kSkin});
  o.require(v.code == 0 && v.out.find("subjects: 290\n") != std::string::npos, "validate reports 290 subjects");
  o.require(v.out.find("observations per subject: 1-17\n") != std::string::npos,
            "validate reports 1-17 observations per subject");
  o.require(v.out.find("time range: 12-1766\n") != std::string::npos, "validate reports times 12-1766 days");

  const auto dir = fs::temp_directory_path() / ("panelrate_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const auto s = cli({"smooth", "--input", kSkin, "--out-dir", (dir / "smooth").string()});
  const auto first_line = s.out.substr(0, s.out.find('\n'));
  o.require(s.code == 0 && s.out.rfind("h_n = 1.76 ", 0) == 0, "smooth default bandwidth: " + first_line);

  const auto ds = validate_dataset(read_panel_csv(kSkin));
  const auto basal = empirical_rate_curve(ds, CauseId(1));
  const auto squamous = empirical_rate_curve(ds, CauseId(2));
  std::size_t above = 0;
  for (std::size_t q = 0; q < basal.points.size(); ++q) above += *basal.points[q].estimate > *squamous.points[q].estimate;
  const double share = static_cast<double>(above) / static_cast<double>(basal.points.size());
  o.require(share > 0.5, fmt("basal rate above squamous at %zu of %zu grid points (%.1f%%)", above,
                             basal.points.size(), 100.0 * share));
  o.note("data: bundled synthetic clone with the published summary statistics, not the trial data");
  fs::remove_all(dir);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  const auto dir = fs::temp_directory_path() / ("panelrate_determinism_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  for (const char* threads : {"1", "4"}) {
    const auto out = (dir / threads).string();
    bool ok = cli({"estimate", "--input", kSkin, "--mean-based", "--out-dir", out}).code == 0;
    ok = ok && cli({"smooth", "--input", kSkin, "--out-dir", out}).code == 0;
    ok = ok && cli({"simulate", "--n", "100,200", "--reps", "300", "--estimator", "both", "--check",
                    "--oracle-reps", "300000", "--threads", threads, "--out-dir", out})
                       .code == 0;
    o.require(ok, std::string("runs with ") + threads + " thread(s) succeeded");
  }
  // a third run with the same thread count as the first
  const auto again = (dir / "again").string();
  cli({"estimate", "--input", kSkin, "--mean-based", "--out-dir", again});
  cli({"smooth", "--input", kSkin, "--out-dir", again});
  cli({"simulate", "--n", "100,200", "--reps", "300", "--estimator", "both", "--check", "--oracle-reps", "300000",
       "--threads", "1", "--out-dir", again});

  std::size_t files = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(dir / "1")) {
    ++files;
    const auto name = entry.path().filename();
    const auto a = slurp(entry.path());
    identical += a == slurp(dir / "4" / name) && a == slurp(dir / "again" / name);
  }
  o.require(files >= 12 && identical == files,
            fmt("%zu of %zu output files byte-identical across reruns and 1 vs 4 threads", identical, files));
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  bool all = true;
  all &= report(1, "sampler fidelity", 30, sampler_fidelity);
  all &= report(2, "kernel weights", 10, kernel_suite);
  all &= report(3, "estimator oracles", 60, estimator_oracles);

  const std::vector<Study> studies = {run_study(StudyEstimator::empirical), run_study(StudyEstimator::smoothed)};
  all &= report(4, "n-scaling of bias and MSE (default design)", 0, [&] { return scaling(studies); });
  all &= report(5, "asymptotic unbiasedness, consistency, normality (default design)", 0,
                [&] { return asymptotics(studies); });

  all &= report(6, "skin-cancer pipeline (synthetic clone)", 0, real_data);
  all &= report(7, "byte-identical outputs independent of thread count", 0, determinism);
  std::printf("%s\n", all ? "all criteria pass" : "some criteria fail");
  return all ? 0 : 1;
}
