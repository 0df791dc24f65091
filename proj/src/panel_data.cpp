#include "panelrate/panel_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "panelrate/errors.hpp"

namespace panelrate {

namespace {

std::string where(const std::string& subject_id, std::size_t line) {
  std::string s = "subject '" + subject_id + "'";
  if (line > 0) s += " (line " + std::to_string(line) + ")";
  return s;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

template <class T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("line " + std::to_string(line) + ": cannot parse " + what + " '" +
                     std::string(field) + "'");
  }
  return value;
}

}  // namespace

CauseId::CauseId(int index) : index_(index) {
  if (index < 1) throw InvalidCause("cause index must be >= 1, got " + std::to_string(index));
}

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
  for (std::size_t q = 1; q < points_.size(); ++q) {
    if (!(points_[q - 1] < points_[q])) {
      throw NonMonotoneTimes("grid point " + std::to_string(q) + " does not increase");
    }
  }
}

TimeGrid TimeGrid::from_unsorted(std::vector<double> times) {
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return TimeGrid(std::move(times));
}

std::size_t TimeGrid::index_of(double t) const noexcept {
  auto it = std::lower_bound(points_.begin(), points_.end(), t);
  if (it == points_.end() || *it != t) return points_.size();
  return static_cast<std::size_t>(it - points_.begin());
}

PanelDataset PanelDataset::from_subjects(std::vector<SubjectRecord> subjects, int num_causes) {
  if (subjects.empty()) throw EmptyDataset("dataset has no subjects");
  if (num_causes < 1) throw InconsistentCauseCount("dataset must have at least one cause");

  std::size_t total_obs = 0;
  for (const auto& s : subjects) {
    const auto here = [&s] { return where(s.subject_id, 0); };
    if (s.obs_times.empty()) throw EmptyDataset(here() + " has no observations");
    if (s.cum_counts.size() != static_cast<std::size_t>(num_causes)) {
      throw InconsistentCauseCount(here() + " has " + std::to_string(s.cum_counts.size()) +
                                   " causes, expected " + std::to_string(num_causes));
    }
    for (std::size_t p = 0; p < s.obs_times.size(); ++p) {
      const double t = s.obs_times[p];
      if (!std::isfinite(t) || t <= 0.0) {
        throw NonPositiveTime(here() + " has non-positive or non-finite time " + std::to_string(t));
      }
      if (p > 0 && !(s.obs_times[p - 1] < t)) {
        throw NonMonotoneTimes(here() + " has times out of order at visit " + std::to_string(p + 1));
      }
    }
    for (std::size_t j = 0; j < s.cum_counts.size(); ++j) {
      const auto& counts = s.cum_counts[j];
      if (counts.size() != s.obs_times.size()) {
        throw InconsistentCauseCount(here() + " cause " + std::to_string(j + 1) +
                                     " has a mismatched number of counts");
      }
      std::int64_t previous = 0;
      for (std::size_t p = 0; p < counts.size(); ++p) {
        if (counts[p] < previous) {
          throw DecreasingCumulativeCount(here() + " cause " + std::to_string(j + 1) +
                                          " drops at visit " + std::to_string(p + 1));
        }
        previous = counts[p];
      }
    }
    total_obs += s.obs_times.size();
  }

  PanelDataset ds;
  ds.num_causes_ = num_causes;

  std::vector<double> all_times;
  all_times.reserve(total_obs);
  for (const auto& s : subjects) all_times.insert(all_times.end(), s.obs_times.begin(), s.obs_times.end());
  ds.grid_ = TimeGrid::from_unsorted(std::move(all_times));

  ds.sorted_last_times_.reserve(subjects.size());
  ds.last_index_.reserve(subjects.size());
  for (const auto& s : subjects) {
    ds.sorted_last_times_.push_back(s.last_time());
    ds.last_index_.push_back(ds.grid_.index_of(s.last_time()));
  }
  std::sort(ds.sorted_last_times_.begin(), ds.sorted_last_times_.end());
  ds.subjects_ = std::move(subjects);
  return ds;
}

std::size_t PanelDataset::at_risk(double t) const noexcept {
  auto it = std::lower_bound(sorted_last_times_.begin(), sorted_last_times_.end(), t);
  return static_cast<std::size_t>(sorted_last_times_.end() - it);
}

PanelDataset validate_dataset(std::span<const RawRow> rows) {
  if (rows.empty()) throw EmptyDataset("no data rows");

  const std::size_t num_causes = rows.front().cum_counts.size();
  if (num_causes == 0) throw InconsistentCauseCount("rows carry no cause columns");

  std::vector<SubjectRecord> subjects;
  std::unordered_map<std::string, std::size_t> position;

  for (const auto& row : rows) {
    if (row.cum_counts.size() != num_causes) {
      throw InconsistentCauseCount(where(row.subject_id, row.line) + " has " +
                                   std::to_string(row.cum_counts.size()) + " cause columns, expected " +
                                   std::to_string(num_causes));
    }
    if (!std::isfinite(row.time) || row.time <= 0.0) {
      throw NonPositiveTime(where(row.subject_id, row.line) + " has time " + std::to_string(row.time));
    }
    auto [it, inserted] = position.try_emplace(row.subject_id, subjects.size());
    if (inserted) {
      SubjectRecord s;
      s.subject_id = row.subject_id;
      s.cum_counts.resize(num_causes);
      subjects.push_back(std::move(s));
    }
    auto& s = subjects[it->second];
    if (!s.obs_times.empty() && !(s.obs_times.back() < row.time)) {
      throw NonMonotoneTimes(where(row.subject_id, row.line) + " time " + std::to_string(row.time) +
                             " does not exceed the previous visit " + std::to_string(s.obs_times.back()));
    }
    for (std::size_t j = 0; j < num_causes; ++j) {
      const auto previous = s.cum_counts[j].empty() ? std::int64_t{0} : s.cum_counts[j].back();
      if (row.cum_counts[j] < previous) {
        throw DecreasingCumulativeCount(where(row.subject_id, row.line) + " cause " +
                                        std::to_string(j + 1) + " drops from " + std::to_string(previous) +
                                        " to " + std::to_string(row.cum_counts[j]));
      }
      s.cum_counts[j].push_back(row.cum_counts[j]);
    }
    s.obs_times.push_back(row.time);
  }

  return PanelDataset::from_subjects(std::move(subjects), static_cast<int>(num_causes));
}

std::vector<RawRow> to_rows(const PanelDataset& dataset) {
  std::vector<RawRow> rows;
  for (const auto& s : dataset.subjects()) {
    for (std::size_t p = 0; p < s.num_obs(); ++p) {
      RawRow row;
      row.subject_id = s.subject_id;
      row.time = s.obs_times[p];
      for (const auto& counts : s.cum_counts) row.cum_counts.push_back(counts[p]);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<RawRow> parse_panel_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  std::size_t num_columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    num_columns = split_commas(line).size();
    break;
  }
  if (num_columns == 0) throw EmptyDataset("file has no header");
  if (num_columns < 3) {
    throw ParseError("header needs subject_id,time and at least one cum_count column");
  }

  std::vector<RawRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto fields = split_commas(line);
    if (fields.size() != num_columns) {
      throw InconsistentCauseCount("line " + std::to_string(line_no) + " has " +
                                   std::to_string(fields.size()) + " fields, header has " +
                                   std::to_string(num_columns));
    }
    RawRow row;
    row.line = line_no;
    row.subject_id = std::string(fields[0]);
    row.time = parse_number<double>(fields[1], line_no, "time");
    for (std::size_t c = 2; c < fields.size(); ++c) {
      row.cum_counts.push_back(parse_number<std::int64_t>(fields[c], line_no, "count"));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyDataset("file has a header but no data rows");
  return rows;
}

std::vector<RawRow> read_panel_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_panel_csv(buffer.str());
}

}  // namespace panelrate
