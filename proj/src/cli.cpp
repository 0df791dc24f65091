#include "panelrate/cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "panelrate/curve_io.hpp"
#include "panelrate/errors.hpp"
#include "panelrate/estimators.hpp"
#include "panelrate/panel_data.hpp"
#include "panelrate/simulation.hpp"
#include "panelrate/smoothing.hpp"

namespace panelrate {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
  std::string input;
  std::string out_dir = ".";
  double alpha = 0.05;
  std::string bandwidth = "n^0.1";
  std::size_t mesh = 200;
  bool mean_based = false;
  bool svg = false;
  std::string n_list = "100,200,500";
  std::size_t reps = 1000;
  std::string theta = "0.2,0.3,0.5";
  std::uint64_t seed = SimDesign{}.seed;
  std::string estimator = "empirical";
  bool gap_scaled = false;
  bool self_truth = false;
  std::size_t oracle_reps = 2'000'000;
  double oracle_delta = 0.25;
  std::string eval_times;
  bool check = false;
  unsigned threads = 0;
};

std::vector<double> parse_doubles(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || ptr != item.data() + item.size()) {
      throw InvalidArgument(std::string("cannot parse ") + what + " '" + text + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument(std::string("empty ") + what);
  return out;
}

std::string json_to_flag_value(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string joined;
    for (const auto& item : v) {
      if (!joined.empty()) joined += ',';
      joined += json_to_flag_value(item);
    }
    return joined;
  }
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) return format_number(v.get<double>());
  throw InvalidArgument("unsupported config value " + v.dump());
}

// Moves `--config PATH` out of the argument list and splices the file's
// settings in front of the explicit flags, so later flags take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw ParseError("config must be a JSON object");

  static const std::vector<std::string> commands = {"validate", "estimate", "smooth", "simulate"};
  const bool has_command =
      args.size() > 1 && std::find(commands.begin(), commands.end(), args[1]) != commands.end();
  if (!has_command && doc.contains("command")) {
    args.insert(args.begin() + 1, doc["command"].get<std::string>());
  }

  std::vector<std::string> injected;
  for (const auto& [key, value] : doc.items()) {
    if (key == "command") continue;
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (value.is_boolean()) {
      if (value.get<bool>()) injected.push_back(flag);
      continue;
    }
    injected.push_back(flag);
    injected.push_back(json_to_flag_value(value));
  }
  const auto at = args.size() > 1 ? args.begin() + 2 : args.end();
  args.insert(at, injected.begin(), injected.end());
  return args;
}

PanelDataset load_dataset(const std::string& path) {
  const auto rows = read_panel_csv(path);
  return validate_dataset(rows);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParseError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string path_in(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  const auto ds = load_dataset(cfg.input);
  std::size_t min_obs = SIZE_MAX, max_obs = 0, visits = 0;
  double t_min = INFINITY, t_max = -INFINITY;
  for (const auto& s : ds.subjects()) {
    min_obs = std::min(min_obs, s.num_obs());
    max_obs = std::max(max_obs, s.num_obs());
    visits += s.num_obs();
    t_min = std::min(t_min, s.obs_times.front());
    t_max = std::max(t_max, s.last_time());
  }
  out << "subjects: " << ds.num_subjects() << '\n'
      << "causes: " << ds.num_causes() << '\n'
      << "visits: " << visits << '\n'
      << "observations per subject: " << min_obs << '-' << max_obs << '\n'
      << "time range: " << format_number(t_min) << '-' << format_number(t_max) << '\n'
      << "distinct observation times: " << ds.grid().size() << '\n';
  return kExitOk;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out) {
  const auto ds = load_dataset(cfg.input);
  std::vector<RateCurve> empirical, jumps, slopes;
  std::vector<MeanCurve> means;
  for (int j = 1; j <= ds.num_causes(); ++j) {
    const CauseId cause(j);
    empirical.push_back(rate_confidence_band(ds, cause, cfg.alpha));
    if (cfg.mean_based) {
      means.push_back(isotonic_mean_curve(ds, cause));
      jumps.push_back(rate_from_mean_jump(means.back()));
      slopes.push_back(rate_from_mean_slope(means.back()));
    }
  }

  ensure_dir(cfg.out_dir);
  const std::vector<std::pair<std::string, std::string>> meta = {{"alpha", format_number(cfg.alpha)}};
  for (std::size_t k = 0; k < empirical.size(); ++k) {
    const auto suffix = "_cause" + std::to_string(k + 1) + ".csv";
    write_curve_csv(path_in(cfg.out_dir, "empirical" + suffix), std::span(&empirical[k], 1), meta);
    if (cfg.mean_based) {
      write_mean_csv(path_in(cfg.out_dir, "mean" + suffix), means[k]);
      write_curve_csv(path_in(cfg.out_dir, "jump" + suffix), std::span(&jumps[k], 1));
      write_curve_csv(path_in(cfg.out_dir, "slope" + suffix), std::span(&slopes[k], 1));
    }
  }
  if (cfg.svg) {
    write_svg_plot(path_in(cfg.out_dir, "empirical.svg"), empirical, "Empirical cause-specific rates", {});
  }
  out << "wrote " << empirical.size() << " empirical curves over " << ds.grid().size() << " grid points to "
      << cfg.out_dir << '\n';
  return kExitOk;
}

int cmd_smooth(const RunConfig& cfg, std::ostream& out) {
  const auto ds = load_dataset(cfg.input);
  KernelConfig kernel;
  if (cfg.bandwidth == "n^0.1" || cfg.bandwidth == "n^{1/10}") {
    kernel = KernelConfig::n_pow_tenth(ds.num_subjects());
  } else {
    kernel = KernelConfig::fixed(parse_doubles(cfg.bandwidth, "bandwidth").front());
  }
  const auto eval = default_eval_points(ds.grid(), cfg.mesh);

  std::vector<RateCurve> curves;
  for (int j = 1; j <= ds.num_causes(); ++j) {
    curves.push_back(smoothed_rate_band(ds, CauseId(j), kernel, eval, cfg.alpha));
  }

  ensure_dir(cfg.out_dir);
  const std::vector<std::pair<std::string, std::string>> meta = {{"h_n", format_number(kernel.bandwidth)},
                                                                 {"alpha", format_number(cfg.alpha)}};
  for (std::size_t k = 0; k < curves.size(); ++k) {
    write_curve_csv(path_in(cfg.out_dir, "smoothed_cause" + std::to_string(k + 1) + ".csv"),
                    std::span(&curves[k], 1), meta);
  }
  if (cfg.svg) {
    write_svg_plot(path_in(cfg.out_dir, "smoothed.svg"), curves,
                   "Kernel-smoothed cause-specific rates, h_n=" + format_number(kernel.bandwidth), {});
  }
  char rounded[32];
  std::snprintf(rounded, sizeof rounded, "%.2f", kernel.bandwidth);
  out << "h_n = " << rounded << " (" << format_number(kernel.bandwidth) << ")\n"
      << "wrote " << curves.size() << " smoothed curves over " << eval.size() << " evaluation points to "
      << cfg.out_dir << '\n';
  return kExitOk;
}

void print_check(std::ostream& out, const AsymptoticSummary& s, std::size_t n_small, std::size_t n_large) {
  out << "asymptotic checks (n=" << n_small << " vs n=" << n_large << ")\n";
  for (const auto* r : {&s.unbiasedness, &s.consistency, &s.normality}) {
    out << "  " << to_string(r->status) << "  " << r->name << " [" << r->detail << "]\n";
  }
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  SimDesign base;
  base.reps = cfg.reps;
  const auto theta = parse_doubles(cfg.theta, "theta");
  if (theta.size() != 3) throw InvalidArgument("--theta needs three values");
  base.params = {theta[0], theta[1], theta[2]};
  base.seed = cfg.seed;
  base.increments = cfg.gap_scaled ? IncrementMode::gap_scaled : IncrementMode::per_panel;
  base.oracle_delta = cfg.oracle_delta;

  std::vector<std::size_t> ns;
  for (double v : parse_doubles(cfg.n_list, "n")) {
    if (!(v >= 1.0) || v != std::floor(v)) throw InvalidArgument("--n values must be positive integers");
    ns.push_back(static_cast<std::size_t>(v));
  }

  std::vector<StudyEstimator> estimators;
  if (cfg.estimator == "empirical" || cfg.estimator == "both") estimators.push_back(StudyEstimator::empirical);
  if (cfg.estimator == "smoothed" || cfg.estimator == "both") estimators.push_back(StudyEstimator::smoothed);
  if (estimators.empty()) throw InvalidArgument("--estimator must be empirical, smoothed or both");

  struct Output {
    StudyEstimator estimator;
    std::vector<SimulationReport> reports;
    std::optional<AsymptoticSummary> check;
  };
  std::vector<Output> outputs;
  for (auto estimator : estimators) {
    SimDesign design = base;
    if (!cfg.eval_times.empty()) {
      design.eval_times = parse_doubles(cfg.eval_times, "eval times");
    } else {
      design.eval_times =
          estimator == StudyEstimator::empirical ? empirical_table_times() : smoothed_table_times();
    }
    design.validate();
    std::optional<TruthTable> truth;
    if (!cfg.self_truth) truth = oracle_truth(design, cfg.oracle_reps, cfg.threads);

    Output o{estimator, {}, std::nullopt};
    for (std::size_t n : ns) {
      design.n = n;
      o.reports.push_back(cfg.self_truth ? run_bias_mse_study_self_truth(design, estimator, cfg.threads)
                                         : run_bias_mse_study(design, estimator, *truth, cfg.threads));
    }
    if (cfg.check && o.reports.size() >= 2) {
      const auto [lo, hi] = std::minmax_element(o.reports.begin(), o.reports.end(),
                                                [](const auto& a, const auto& b) { return a.design.n < b.design.n; });
      o.check = check_asymptotic_results(*lo, *hi);
    }
    outputs.push_back(std::move(o));
  }

  ensure_dir(cfg.out_dir);
  for (const auto& o : outputs) {
    const std::string stem = std::string("simulation_") + to_string(o.estimator);
    write_report_csv(path_in(cfg.out_dir, stem + ".csv"), o.reports);
    write_report_json(path_in(cfg.out_dir, stem + ".json"), o.reports, cfg.oracle_reps);
    out << to_string(o.estimator) << ": " << o.reports.size() << " sample sizes x "
        << o.reports.front().cells.size() << " cells -> " << path_in(cfg.out_dir, stem + ".csv") << '\n';
    if (o.check) {
      std::ofstream check_file(path_in(cfg.out_dir, stem + "_checks.txt"), std::ios::binary | std::ios::trunc);
      print_check(check_file, *o.check, o.reports.front().design.n, o.reports.back().design.n);
      print_check(out, *o.check, o.reports.front().design.n, o.reports.back().design.n);
    }
  }
  return kExitOk;
}

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::input: return kExitInputError;
    case ErrorCategory::invariant: return kExitInvariantViolation;
    case ErrorCategory::numerical: return kExitNumericalFailure;
  }
  return kExitNumericalFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.category());
  }

  CLI::App app{"Cause-specific rate functions for panel count data"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  RunConfig cfg;

  auto add_input = [&](CLI::App* sub) { sub->add_option("--input", cfg.input, "Panel CSV file")->required(); };
  auto add_out = [&](CLI::App* sub) { sub->add_option("--out-dir", cfg.out_dir, "Output directory"); };
  auto add_alpha = [&](CLI::App* sub) {
    sub->add_option("--alpha", cfg.alpha, "Confidence level is 1-alpha")->check(CLI::Range(0.0, 1.0));
  };

  auto* validate = app.add_subcommand("validate", "Check a panel CSV and print a summary");
  add_input(validate);

  auto* estimate = app.add_subcommand("estimate", "Empirical rate curves with confidence bands");
  add_input(estimate);
  add_out(estimate);
  add_alpha(estimate);
  estimate->add_flag("--mean-based", cfg.mean_based, "Also write jump and slope estimates from the isotonic mean");
  estimate->add_flag("--svg", cfg.svg, "Also write an SVG plot");

  auto* smooth = app.add_subcommand("smooth", "Kernel-smoothed rate curves");
  add_input(smooth);
  add_out(smooth);
  add_alpha(smooth);
  smooth->add_option("--bandwidth", cfg.bandwidth, "Bandwidth value or n^0.1");
  smooth->add_option("--mesh", cfg.mesh, "Uniform evaluation mesh size")->check(CLI::Range(2, 1000000));
  smooth->add_flag("--svg", cfg.svg, "Also write an SVG plot");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo bias/MSE study");
  add_out(simulate);
  simulate->add_option("--n", cfg.n_list, "Comma-separated sample sizes");
  simulate->add_option("--reps", cfg.reps, "Replications per sample size")->check(CLI::PositiveNumber);
  simulate->add_option("--theta", cfg.theta, "theta1,theta2,theta3");
  simulate->add_option("--seed", cfg.seed, "Master seed");
  simulate->add_option("--estimator", cfg.estimator, "empirical, smoothed or both");
  simulate->add_flag("--gap-scaled", cfg.gap_scaled, "Scale increment means with the panel length");
  simulate->add_flag("--self-truth", cfg.self_truth, "Use the mean estimate as the truth");
  simulate->add_option("--oracle-reps", cfg.oracle_reps, "Cohort size of the truth oracle");
  simulate->add_option("--oracle-delta", cfg.oracle_delta, "Half-width of the oracle finite difference");
  simulate->add_option("--eval-times", cfg.eval_times, "Comma-separated evaluation times");
  simulate->add_flag("--check", cfg.check, "Compare the smallest and largest n");
  simulate->add_option("--threads", cfg.threads, "Worker threads, 0 for all cores (PANELRATE_THREADS caps it)");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (validate->parsed()) return cmd_validate(cfg, out);
    if (estimate->parsed()) return cmd_estimate(cfg, out);
    if (smooth->parsed()) return cmd_smooth(cfg, out);
    return cmd_simulate(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumericalFailure;
  }
}

}  // namespace panelrate
