#pragma once

// Panel count data with several competing modes of recurrence.
//
// Each subject is seen at a strictly increasing sequence of observation
// times and, at every visit, reports the cumulative number of events of each
// cause since time zero. The origin t = 0 with all counts zero is implicit.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace panelrate {

/// One-based cause index, 1 <= index <= J.
class CauseId {
 public:
  explicit CauseId(int index);

  int index() const noexcept { return index_; }
  /// Zero-based position for indexing per-cause storage.
  std::size_t offset() const noexcept { return static_cast<std::size_t>(index_ - 1); }

  friend bool operator==(CauseId, CauseId) = default;

 private:
  int index_;
};

/// Strictly increasing list of time points.
class TimeGrid {
 public:
  TimeGrid() = default;
  /// Throws NonMonotoneTimes unless `points` is strictly increasing.
  explicit TimeGrid(std::vector<double> points);

  /// Sorted, deduplicated union of arbitrary times.
  static TimeGrid from_unsorted(std::vector<double> times);

  std::span<const double> points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  double operator[](std::size_t q) const { return points_[q]; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }

  /// Index of `t` if it is a grid point, otherwise size().
  std::size_t index_of(double t) const noexcept;

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  std::vector<double> points_;
};

struct SubjectRecord {
  std::string subject_id;
  std::vector<double> obs_times;
  /// cum_counts[j][p]: cumulative events of cause j+1 up to obs_times[p].
  std::vector<std::vector<std::int64_t>> cum_counts;

  std::size_t num_obs() const noexcept { return obs_times.size(); }
  double last_time() const { return obs_times.back(); }

  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

/// One input row in long format: a single visit of a single subject.
struct RawRow {
  std::string subject_id;
  double time = 0.0;
  std::vector<std::int64_t> cum_counts;
  /// 1-based line number in the source file, 0 when unknown.
  std::size_t line = 0;
};

/// Validated, immutable collection of subjects plus the pooled time grid.
class PanelDataset {
 public:
  /// Validates subjects that are already grouped and time-ordered.
  static PanelDataset from_subjects(std::vector<SubjectRecord> subjects, int num_causes);

  std::span<const SubjectRecord> subjects() const noexcept { return subjects_; }
  std::size_t num_subjects() const noexcept { return subjects_.size(); }
  int num_causes() const noexcept { return num_causes_; }
  const TimeGrid& grid() const noexcept { return grid_; }

  /// Number of subjects whose last observation time is >= t.
  std::size_t at_risk(double t) const noexcept;

  /// last_grid_index()[i]: grid position of subject i's final visit.
  std::span<const std::size_t> last_grid_index() const noexcept { return last_index_; }

  friend bool operator==(const PanelDataset& a, const PanelDataset& b) {
    return a.num_causes_ == b.num_causes_ && a.subjects_ == b.subjects_ && a.grid_ == b.grid_;
  }

 private:
  PanelDataset() = default;

  std::vector<SubjectRecord> subjects_;
  int num_causes_ = 0;
  TimeGrid grid_;
  std::vector<double> sorted_last_times_;
  std::vector<std::size_t> last_index_;
};

/// Groups rows by subject (first-appearance order) and checks every
/// invariant of the data model. A subject's rows must already be in
/// increasing time order; out-of-order or repeated times are rejected, not
/// sorted, since a reordered visit usually means a data-entry error.
PanelDataset validate_dataset(std::span<const RawRow> rows);

/// Flattens a dataset back into rows, one per visit.
std::vector<RawRow> to_rows(const PanelDataset& dataset);

/// Free-function spelling of PanelDataset::at_risk.
inline std::size_t at_risk(const PanelDataset& dataset, double t) noexcept {
  return dataset.at_risk(t);
}

/// Reads `subject_id,time,cum_count_1,...,cum_count_J` CSV with a header.
std::vector<RawRow> read_panel_csv(const std::string& path);
std::vector<RawRow> parse_panel_csv(const std::string& text);

}  // namespace panelrate
