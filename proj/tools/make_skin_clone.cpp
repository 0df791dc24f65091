// Writes a synthetic stand-in for the skin cancer chemoprevention panel
// data: 290 subjects, 1-17 visits each, visit days spanning 12-1766, and
// two cumulative counts (basal cell, squamous cell carcinoma).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>

#include "panelrate/curve_io.hpp"
#include "panelrate/simulation.hpp"

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : "skin_cancer_synthetic.csv";
  constexpr int kSubjects = 290;
  constexpr double kFirstDay = 12.0;
  constexpr double kLastDay = 1766.0;

  panelrate::RngStream rng(1997, 0);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "subject_id,time,cum_count_1,cum_count_2\n";
  for (int i = 0; i < kSubjects; ++i) {
    // Subject 0 carries the earliest visit and a single observation,
    // subject 1 the full 17 visits ending on the last study day.
    int visits = 1 + static_cast<int>(rng.uniform_int(0, 16));
    if (i == 0) visits = 1;
    if (i == 1) visits = 17;

    std::vector<double> days;
    double day = i == 0 ? kFirstDay : std::round(kFirstDay + 1.0 + rng.uniform() * 200.0);
    for (int v = 0; v < visits && (i == 1 || day <= kLastDay); ++v) {
      days.push_back(day);
      day += std::round(60.0 + rng.uniform() * 140.0);
    }
    if (i == 1) {
      const double scale = (kLastDay - days.front()) / (days.back() - days.front());
      for (auto& d : days) d = std::round(days.front() + (d - days.front()) * scale);
      days.back() = kLastDay;
    }

    long basal = 0, squamous = 0;
    double previous = 0.0;
    for (double d : days) {
      const double years = (d - previous) / 365.25;
      // Basal cell recurrences are roughly twice as frequent; both rates
      // drift over follow-up.
      const double drift = 1.0 + 0.4 * std::sin(d / 300.0);
      basal += rng.poisson(0.9 * years * drift);
      squamous += rng.poisson(0.45 * years * (2.0 - drift));
      previous = d;
      out << "P" << (i + 1) << ',' << panelrate::format_number(d) << ',' << basal << ',' << squamous << '\n';
    }
  }
  std::cout << "wrote " << path << '\n';
  return 0;
}
