#pragma once

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "panelrate/estimators.hpp"
#include "panelrate/simulation.hpp"

namespace panelrate {

/// Shortest text for `value` at 17 significant digits ("%.17g"); NaN and
/// infinities become an empty field.
std::string format_number(double value);

/// Long-format CSV: `cause,time,estimate,ci_lower,ci_upper,estimator_tag`.
/// `metadata` entries are written first as `# key=value` lines.
void write_curve_csv(std::ostream& out, std::span<const RateCurve> curves,
                     const std::vector<std::pair<std::string, std::string>>& metadata = {});
void write_curve_csv(const std::string& path, std::span<const RateCurve> curves,
                     const std::vector<std::pair<std::string, std::string>>& metadata = {});

/// Mean curve rows use the same columns with estimator_tag `mean`.
void write_mean_csv(const std::string& path, const MeanCurve& mean);

struct CurveFile {
  std::map<std::string, std::string> metadata;
  std::vector<RateCurve> curves;
};

/// Parses files written by write_curve_csv.
CurveFile read_curve_csv(const std::string& path);

/// `n,t,cause,abs_bias,mse,contributing,skewness,kurtosis,ks_stat`, one
/// row per cell across all reports.
void write_report_csv(const std::string& path, std::span<const SimulationReport> reports);

/// JSON provenance: the design, the truth used, and per-cell diagnostics
/// not carried by the CSV.
void write_report_json(const std::string& path, std::span<const SimulationReport> reports,
                       std::size_t oracle_reps);

/// Minimal static SVG line plot: solid estimates, dashed bands.
void write_svg_plot(const std::string& path, std::span<const RateCurve> curves, const std::string& title,
                    std::span<const std::string> labels);

}  // namespace panelrate
