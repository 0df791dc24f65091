#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

#include "panelrate/errors.hpp"
#include "panelrate/panel_data.hpp"

using namespace panelrate;

namespace {

RawRow row(std::string id, double t, std::vector<std::int64_t> counts) {
  return RawRow{std::move(id), t, std::move(counts), 0};
}

// Random valid dataset, J causes, rows in subject-major order.
std::vector<RawRow> random_rows(std::mt19937_64& gen, int subjects, int causes) {
  std::uniform_int_distribution<int> visits(1, 6);
  std::uniform_int_distribution<int> step(1, 4);
  std::uniform_int_distribution<int> inc(0, 3);
  std::vector<RawRow> rows;
  for (int i = 0; i < subjects; ++i) {
    double t = 0.0;
    std::vector<std::int64_t> c(causes, 0);
    for (int p = visits(gen); p > 0; --p) {
      t += step(gen);  // integer days, so ties across subjects are common
      for (auto& v : c) v += inc(gen);
      rows.push_back(row("s" + std::to_string(i), t, c));
    }
  }
  return rows;
}

}  // namespace

TEST_CASE("minimal well-formed input") {
  const std::vector<RawRow> rows{row("a", 2, {1, 0}), row("a", 5, {3, 0})};
  const auto ds = validate_dataset(rows);
  CHECK(ds.num_subjects() == 1);
  CHECK(ds.num_causes() == 2);
  CHECK(std::vector<double>(ds.grid().points().begin(), ds.grid().points().end()) == std::vector<double>{2, 5});
  CHECK(ds.subjects()[0].cum_counts[0] == std::vector<std::int64_t>{1, 3});
  CHECK(ds.subjects()[0].cum_counts[1] == std::vector<std::int64_t>{0, 0});
}

TEST_CASE("grid is the deduplicated union") {
  const std::vector<RawRow> rows{row("a", 2, {0}), row("a", 5, {1}), row("b", 3, {0}), row("b", 5, {0})};
  const auto ds = validate_dataset(rows);
  CHECK(std::vector<double>(ds.grid().points().begin(), ds.grid().points().end()) == std::vector<double>{2, 3, 5});
  CHECK(ds.grid().index_of(3) == 1);
  CHECK(ds.grid().index_of(4) == ds.grid().size());
}

TEST_CASE("rows of a subject may be interleaved with other subjects") {
  const std::vector<RawRow> rows{row("a", 1, {0}), row("b", 2, {1}), row("a", 4, {2})};
  const auto ds = validate_dataset(rows);
  REQUIRE(ds.num_subjects() == 2);
  CHECK(ds.subjects()[0].subject_id == "a");
  CHECK(ds.subjects()[0].obs_times == std::vector<double>{1, 4});
  CHECK(ds.subjects()[1].subject_id == "b");
}

TEST_CASE("validation errors") {
  SUBCASE("decreasing times") {
    const std::vector<RawRow> rows{row("a", 5, {0}), row("a", 2, {0})};
    CHECK_THROWS_AS(validate_dataset(rows), NonMonotoneTimes);
  }
  SUBCASE("repeated time within a subject") {
    const std::vector<RawRow> rows{row("a", 2, {0}), row("a", 2, {1})};
    CHECK_THROWS_AS(validate_dataset(rows), NonMonotoneTimes);
  }
  SUBCASE("cumulative count drops") {
    const std::vector<RawRow> rows{row("a", 1, {0, 3}), row("a", 2, {1, 2})};
    CHECK_THROWS_AS(validate_dataset(rows), DecreasingCumulativeCount);
  }
  SUBCASE("negative count") {
    const std::vector<RawRow> rows{row("a", 1, {-1})};
    CHECK_THROWS_AS(validate_dataset(rows), DecreasingCumulativeCount);
  }
  SUBCASE("non-positive time") {
    const std::vector<RawRow> zero{row("a", 0, {0})};
    CHECK_THROWS_AS(validate_dataset(zero), NonPositiveTime);
    const std::vector<RawRow> negative{row("a", -1, {0})};
    CHECK_THROWS_AS(validate_dataset(negative), NonPositiveTime);
  }
  SUBCASE("cause count differs between rows") {
    const std::vector<RawRow> rows{row("a", 1, {0, 0}), row("b", 1, {0})};
    CHECK_THROWS_AS(validate_dataset(rows), InconsistentCauseCount);
  }
  SUBCASE("no causes") {
    const std::vector<RawRow> rows{row("a", 1, {})};
    CHECK_THROWS_AS(validate_dataset(rows), InconsistentCauseCount);
  }
  SUBCASE("empty") {
    CHECK_THROWS_AS(validate_dataset(std::vector<RawRow>{}), EmptyDataset);
  }
}

TEST_CASE("cause ids are one-based") {
  CHECK(CauseId(1).offset() == 0);
  CHECK_THROWS_AS(CauseId(0), InvalidCause);
}

TEST_CASE("time grid must be strictly increasing") {
  CHECK_THROWS_AS(TimeGrid({1.0, 1.0}), NonMonotoneTimes);
  CHECK_THROWS_AS(TimeGrid({2.0, 1.0}), NonMonotoneTimes);
  const auto g = TimeGrid::from_unsorted({3, 1, 3, 2});
  CHECK(std::vector<double>(g.points().begin(), g.points().end()) == std::vector<double>{1, 2, 3});
}

TEST_CASE("at-risk count examples") {
  const std::vector<RawRow> rows{row("a", 2, {0}), row("a", 5, {0}), row("b", 10, {0})};
  const auto ds = validate_dataset(rows);
  CHECK(at_risk(ds, 7) == 1);
  CHECK(at_risk(ds, 5) == 2);  // inclusive at the last visit
  CHECK(at_risk(ds, 11) == 0);
}

TEST_CASE("at-risk properties on random data") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ds = validate_dataset(random_rows(gen, 20, 2));
    std::size_t previous = ds.num_subjects();
    for (double t : ds.grid().points()) {
      const auto y = ds.at_risk(t);
      std::size_t brute = 0;
      for (const auto& s : ds.subjects()) brute += t <= s.last_time();
      CHECK(y == brute);
      CHECK(y <= previous);
      CHECK(y <= ds.num_subjects());
      previous = y;
    }
    CHECK(ds.at_risk(ds.grid().front()) >= 1);
  }
}

TEST_CASE("grid holds every visit time exactly once and nothing else") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ds = validate_dataset(random_rows(gen, 15, 1));
    std::set<double> seen;
    for (const auto& s : ds.subjects()) seen.insert(s.obs_times.begin(), s.obs_times.end());
    CHECK(std::vector<double>(seen.begin(), seen.end()) ==
          std::vector<double>(ds.grid().points().begin(), ds.grid().points().end()));
    for (std::size_t i = 0; i < ds.num_subjects(); ++i) {
      CHECK(ds.grid()[ds.last_grid_index()[i]] == ds.subjects()[i].last_time());
    }
  }
}

TEST_CASE("validation is idempotent") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ds = validate_dataset(random_rows(gen, 12, 3));
    const auto again = validate_dataset(to_rows(ds));
    CHECK(again == ds);
  }
}

TEST_CASE("csv parsing") {
  const auto rows = parse_panel_csv(
      "subject_id,time,cum_count_1,cum_count_2\n"
      "# comment\n"
      "\n"
      "7,12,1,0\r\n"
      "7,40.5,2,1\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].subject_id == "7");
  CHECK(rows[1].time == 40.5);
  CHECK(rows[1].cum_counts == std::vector<std::int64_t>{2, 1});

  CHECK_THROWS_AS(parse_panel_csv(""), EmptyDataset);
  CHECK_THROWS_AS(parse_panel_csv("subject_id,time,c1\n"), EmptyDataset);
  CHECK_THROWS_AS(parse_panel_csv("subject_id,time,c1\n1,abc,0\n"), ParseError);
  CHECK_THROWS_AS(parse_panel_csv("subject_id,time,c1\n1,2,0,0\n"), InconsistentCauseCount);
  CHECK_THROWS_AS(read_panel_csv("/nonexistent/file.csv"), ParseError);
}

TEST_CASE("bundled synthetic data set") {
  const auto ds = validate_dataset(read_panel_csv(PANELRATE_DATA_DIR "/skin_cancer_synthetic.csv"));
  CHECK(ds.num_subjects() == 290);
  CHECK(ds.num_causes() == 2);
  std::size_t lo = 1000, hi = 0;
  for (const auto& s : ds.subjects()) {
    lo = std::min(lo, s.num_obs());
    hi = std::max(hi, s.num_obs());
  }
  CHECK(lo == 1);
  CHECK(hi == 17);
  CHECK(ds.grid().front() == 12);
  CHECK(ds.grid().back() == 1766);
}
