#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "sfpca/dataset.hpp"
#include "sfpca/errors.hpp"
#include "sfpca/stats.hpp"
#include "test_helpers.hpp"

using namespace sfpca;
using test_util::TempDir;
using test_util::write_text;

TEST_SUITE("dataset") {

TEST_CASE("load_csv groups a small file into subjects") {
  TempDir dir;
  const std::string path = dir.file("data.csv");
  write_text(path,
             "subject_id,time,value\n"
             "s1,0.0,1.2\n"
             "s1,0.5,1.8\n"
             "s2,0.25,0.4\n");
  const auto data = load_csv(path);
  REQUIRE(data.n_subjects() == 2);
  CHECK(data.n_total == 3);
  CHECK(data.subjects[0].id == "s1");
  CHECK(data.subjects[0].n_obs() == 2);
  CHECK(data.subjects[1].id == "s2");
  CHECK(data.subjects[1].times[0] == doctest::Approx(0.25));
  CHECK(data.time_range.first == doctest::Approx(0.0));
  CHECK(data.time_range.second == doctest::Approx(0.5));
}

TEST_CASE("load_csv sorts within subject and accepts shuffled columns") {
  TempDir dir;
  const std::string path = dir.file("data.csv");
  write_text(path,
             "value,subject_id,extra,time\n"
             "3.0,a,x,0.9\n"
             "1.0,a,x,0.1\n"
             "2.0,a,x,0.5\n");
  const auto data = load_csv(path);
  REQUIRE(data.n_subjects() == 1);
  const auto& s = data.subjects[0];
  CHECK(s.times[0] == doctest::Approx(0.1));
  CHECK(s.times[1] == doctest::Approx(0.5));
  CHECK(s.times[2] == doctest::Approx(0.9));
  CHECK(s.values[0] == doctest::Approx(1.0));
  CHECK(s.values[2] == doctest::Approx(3.0));
}

TEST_CASE("load_csv reports the failing row on a parse error") {
  TempDir dir;
  const std::string path = dir.file("bad.csv");
  write_text(path,
             "subject_id,time,value\n"
             "s1,0.0,1.2\n"
             "s1,abc,1.8\n");
  CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("row 3"), ParseError);
}

TEST_CASE("load_csv rejects a missing column and a missing file") {
  TempDir dir;
  const std::string path = dir.file("cols.csv");
  write_text(path, "subject_id,t,value\ns1,0,1\n");
  CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("time"), FormatError);
  CHECK_THROWS_WITH_AS(load_csv(dir.file("nope.csv")), doctest::Contains("nope.csv"),
                       LookupError);
}

TEST_CASE("duplicate times within a subject are rejected") {
  CHECK_THROWS_AS(make_dataset({"a", "a"}, {0.3, 0.3}, {1.0, 2.0}), ValidationError);
}

TEST_CASE("make_dataset keeps first-appearance subject order") {
  const auto data = make_dataset({"b", "a", "b"}, {0.1, 0.2, 0.9}, {1.0, 2.0, 3.0});
  REQUIRE(data.n_subjects() == 2);
  CHECK(data.subjects[0].id == "b");
  CHECK(data.subjects[1].id == "a");
  CHECK(data.subjects[0].n_obs() == 2);
  CHECK(data.subject_index("a") == 1);
  CHECK_THROWS_AS(data.subject_index("zz"), LookupError);
}

TEST_CASE("grouping preserves the multiset of observations") {
  const auto raw_times = std::vector<double>{0.4, 0.1, 0.7, 0.2, 0.9};
  const auto raw_values = std::vector<double>{4.0, 1.0, 7.0, 2.0, 9.0};
  const auto data =
      make_dataset({"x", "y", "x", "y", "x"}, raw_times, raw_values);
  std::multimap<double, double> expected, got;
  for (size_t i = 0; i < raw_times.size(); ++i) expected.insert({raw_times[i], raw_values[i]});
  for (const auto& s : data.subjects) {
    for (int j = 0; j < s.n_obs(); ++j) got.insert({s.times[j], s.values[j]});
  }
  CHECK(expected == got);
}

TEST_CASE("standardize maps (1,2,3) to (-1,0,1)") {
  const auto data = make_dataset({"a", "a", "a"}, {0.0, 0.5, 1.0}, {1.0, 2.0, 3.0});
  const auto [std_data, st] = standardize(data);
  CHECK(st.mean == doctest::Approx(2.0));
  CHECK(st.sd == doctest::Approx(1.0));
  CHECK(st.applied);
  CHECK(std_data.subjects[0].values[0] == doctest::Approx(-1.0));
  CHECK(std_data.subjects[0].values[1] == doctest::Approx(0.0));
  CHECK(std_data.subjects[0].values[2] == doctest::Approx(1.0));
}

TEST_CASE("standardized outcomes have pooled mean 0 and sd 1") {
  const auto data = test_util::toy_dataset(12, 6, 21);
  const auto [std_data, st] = standardize(data);
  const auto pooled = std_data.pooled_values();
  CHECK(std::abs(stats::mean(pooled)) < 1e-10);
  CHECK(std::abs(stats::sample_sd(pooled) - 1.0) < 1e-10);

  // Standardizing again is a no-op up to roundoff.
  const auto [again, st2] = standardize(std_data);
  CHECK(std::abs(st2.mean) < 1e-12);
  CHECK(st2.sd == doctest::Approx(1.0).epsilon(1e-12));

  // Back-transform recovers the original values.
  const auto orig = data.pooled_values();
  const auto stdv = std_data.pooled_values();
  for (size_t i = 0; i < orig.size(); ++i) {
    CHECK(st.to_original(stdv[i]) == doctest::Approx(orig[i]).epsilon(1e-10));
  }
}

TEST_CASE("constant outcome cannot be standardized") {
  const auto data = make_dataset({"a", "a", "b"}, {0.0, 0.5, 0.2}, {7.0, 7.0, 7.0});
  CHECK_THROWS_AS(standardize(data), DegenerateDataError);
}

TEST_CASE("rescale_time maps weeks 0..9 onto [0, 1]") {
  std::vector<std::string> ids;
  std::vector<double> t, v;
  for (int w = 0; w < 10; ++w) {
    ids.push_back("p");
    t.push_back(w);
    v.push_back(w * 0.1);
  }
  const auto scaled = rescale_time(make_dataset(ids, t, v));
  CHECK(scaled.time_rescaled);
  CHECK(scaled.time_range.first == doctest::Approx(0.0));
  CHECK(scaled.time_range.second == doctest::Approx(9.0));
  const auto& s = scaled.subjects[0];
  CHECK(s.times[0] == doctest::Approx(0.0));
  CHECK(s.times[9] == doctest::Approx(1.0));
  CHECK(s.times[4] == doctest::Approx(4.0 / 9.0));
}

TEST_CASE("rescale_time needs more than one distinct time") {
  const auto data = make_dataset({"a", "b"}, {2.0, 2.0}, {1.0, 3.0});
  CHECK_THROWS_AS(rescale_time(data), DegenerateDataError);
}

TEST_CASE("without_subject removes exactly one subject") {
  const auto data = test_util::toy_dataset(5, 4, 33);
  const auto rest = data.without_subject(2);
  CHECK(rest.n_subjects() == 4);
  CHECK(rest.n_total == data.n_total - data.subjects[2].n_obs());
  CHECK(rest.subjects[0].id == data.subjects[0].id);
  CHECK(rest.subjects[2].id == data.subjects[3].id);
  rest.validate();
  CHECK_THROWS_AS(data.without_subject(9), LookupError);
}

TEST_CASE("save_csv then load_csv round-trips") {
  TempDir dir;
  const auto data = test_util::toy_dataset(4, 5, 44);
  const std::string path = dir.file("round.csv");
  save_csv(data, path);
  const auto back = load_csv(path);
  REQUIRE(back.n_subjects() == data.n_subjects());
  CHECK(back.n_total == data.n_total);
  for (int i = 0; i < data.n_subjects(); ++i) {
    CHECK(back.subjects[i].id == data.subjects[i].id);
    REQUIRE(back.subjects[i].n_obs() == data.subjects[i].n_obs());
    for (int j = 0; j < data.subjects[i].n_obs(); ++j) {
      CHECK(back.subjects[i].times[j] == data.subjects[i].times[j]);
      CHECK(back.subjects[i].values[j] == data.subjects[i].values[j]);
    }
  }
}

TEST_CASE("validate catches structural breakage") {
  auto data = test_util::toy_dataset(3, 4, 55);
  data.n_total += 1;
  CHECK_THROWS_AS(data.validate(), ValidationError);
}

}  // TEST_SUITE
