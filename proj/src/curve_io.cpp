#include "panelrate/curve_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "panelrate/errors.hpp"

namespace panelrate {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write '" + path + "'");
  return out;
}

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'");
  return v;
}

EstimatorTag parse_tag(const std::string& s) {
  for (auto tag : {EstimatorTag::empirical, EstimatorTag::jump, EstimatorTag::slope, EstimatorTag::smoothed}) {
    if (s == to_string(tag)) return tag;
  }
  throw ParseError("unknown estimator tag '" + s + "'");
}

}  // namespace

std::string format_number(double value) {
  if (!std::isfinite(value)) return {};
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, ptr);
}

void write_curve_csv(std::ostream& out, std::span<const RateCurve> curves,
                     const std::vector<std::pair<std::string, std::string>>& metadata) {
  for (const auto& [key, value] : metadata) out << "# " << key << '=' << value << '\n';
  out << "cause,time,estimate,ci_lower,ci_upper,estimator_tag\n";
  for (const auto& curve : curves) {
    for (const auto& p : curve.points) {
      out << curve.cause.index() << ',' << format_number(p.time) << ',' << opt(p.estimate) << ','
          << opt(p.ci_lower) << ',' << opt(p.ci_upper) << ',' << to_string(curve.tag) << '\n';
    }
  }
}

void write_curve_csv(const std::string& path, std::span<const RateCurve> curves,
                     const std::vector<std::pair<std::string, std::string>>& metadata) {
  auto out = open_out(path);
  write_curve_csv(out, curves, metadata);
}

void write_mean_csv(const std::string& path, const MeanCurve& mean) {
  auto out = open_out(path);
  out << "cause,time,estimate,ci_lower,ci_upper,estimator_tag\n";
  for (std::size_t q = 0; q < mean.grid.size(); ++q) {
    out << mean.cause.index() << ',' << format_number(mean.grid[q]) << ',' << format_number(mean.values[q])
        << ",,,mean\n";
  }
}

CurveFile read_curve_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  CurveFile file;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) file.metadata[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto f = split(line);
    if (f.size() != 6) throw ParseError("curve row needs 6 fields: '" + line + "'");
    const CauseId cause(std::stoi(f[0]));
    const EstimatorTag tag = parse_tag(f[5]);
    if (file.curves.empty() || file.curves.back().cause != cause || file.curves.back().tag != tag) {
      file.curves.push_back(RateCurve{cause, tag, {}});
    }
    file.curves.back().points.push_back({*parse_opt(f[1]), parse_opt(f[2]), parse_opt(f[3]), parse_opt(f[4])});
  }
  return file;
}

void write_report_csv(const std::string& path, std::span<const SimulationReport> reports) {
  auto out = open_out(path);
  out << "n,t,cause,abs_bias,mse,contributing,skewness,kurtosis,ks_stat\n";
  for (const auto& report : reports) {
    for (const auto& c : report.cells) {
      out << c.n << ',' << format_number(c.t) << ',' << c.cause << ',' << format_number(c.abs_bias) << ','
          << format_number(c.mse) << ',' << c.contributing << ',' << format_number(c.normality.skewness) << ','
          << format_number(c.normality.excess_kurtosis) << ',' << format_number(c.normality.ks_stat) << '\n';
    }
  }
}

void write_report_json(const std::string& path, std::span<const SimulationReport> reports,
                       std::size_t oracle_reps) {
  using nlohmann::json;
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json(nullptr); };
  json doc;
  if (!reports.empty()) {
    const auto& d = reports.front().design;
    doc["design"] = {
        {"reps", d.reps},
        {"max_panels", d.max_panels},
        {"gap_upper", d.gap_upper},
        {"theta", {d.params.theta1, d.params.theta2, d.params.theta3}},
        {"eval_times", d.eval_times},
        {"seed", d.seed},
        {"increments", to_string(d.increments)},
        {"oracle_delta", d.oracle_delta},
    };
    doc["estimator"] = to_string(reports.front().estimator);
    doc["truth"] = reports.front().self_truth ? "self" : "oracle";
    doc["oracle_reps"] = reports.front().self_truth ? json(nullptr) : json(oracle_reps);
  }
  json runs = json::array();
  for (const auto& report : reports) {
    json cells = json::array();
    for (const auto& c : report.cells) {
      cells.push_back({{"t", c.t},
                       {"cause", c.cause},
                       {"truth", num(c.truth)},
                       {"abs_bias", num(c.abs_bias)},
                       {"mse", num(c.mse)},
                       {"contributing", c.contributing},
                       {"excluded", c.excluded},
                       {"mean", num(c.normality.mean)},
                       {"sd", num(c.normality.sd)},
                       {"skewness", num(c.normality.skewness)},
                       {"excess_kurtosis", num(c.normality.excess_kurtosis)},
                       {"ks_stat", num(c.normality.ks_stat)},
                       {"ks_pvalue", num(c.normality.ks_pvalue)}});
    }
    runs.push_back({{"n", report.design.n}, {"bandwidth", num(report.bandwidth)}, {"cells", cells}});
  }
  doc["runs"] = runs;
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_svg_plot(const std::string& path, std::span<const RateCurve> curves, const std::string& title,
                    std::span<const std::string> labels) {
  constexpr double width = 800, height = 480, margin = 60;
  double t_min = INFINITY, t_max = -INFINITY, y_max = 0.0;
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      if (!p.estimate) continue;
      t_min = std::min(t_min, p.time);
      t_max = std::max(t_max, p.time);
      y_max = std::max({y_max, *p.estimate, p.ci_upper.value_or(0.0)});
    }
  }
  if (!(t_max > t_min)) t_max = t_min + 1.0;
  if (!(y_max > 0.0)) y_max = 1.0;
  auto x_of = [&](double t) { return margin + (t - t_min) / (t_max - t_min) * (width - 2 * margin); };
  auto y_of = [&](double v) { return height - margin - v / y_max * (height - 2 * margin); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"" << height - margin + 20 << "\" font-size=\"12\">"
      << format_number(t_min) << "</text>\n";
  out << "<text x=\"" << width - margin << "\" y=\"" << height - margin + 20
      << "\" font-size=\"12\" text-anchor=\"end\">" << format_number(t_max) << "</text>\n";
  out << "<text x=\"" << margin - 6 << "\" y=\"" << margin << "\" font-size=\"12\" text-anchor=\"end\">"
      << format_number(y_max) << "</text>\n";

  for (std::size_t k = 0; k < curves.size(); ++k) {
    const char* color = colors[k % 5];
    auto polyline = [&](auto value_of, const char* dash) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\"" << dash << " points=\"";
      for (const auto& p : curves[k].points) {
        const std::optional<double> v = value_of(p);
        if (v) out << x_of(p.time) << ',' << y_of(*v) << ' ';
      }
      out << "\"/>\n";
    };
    polyline([](const RatePoint& p) { return p.estimate; }, "");
    polyline([](const RatePoint& p) { return p.ci_lower; }, " stroke-dasharray=\"4 3\"");
    polyline([](const RatePoint& p) { return p.ci_upper; }, " stroke-dasharray=\"4 3\"");
    const std::string label = k < labels.size() ? labels[k] : "cause " + std::to_string(curves[k].cause.index());
    out << "<text x=\"" << width - margin - 150 << "\" y=\"" << margin + 18 * k << "\" font-size=\"12\" fill=\""
        << color << "\">" << label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace panelrate
