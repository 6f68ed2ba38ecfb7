#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cocreate/behavior.hpp"
#include "doctest.h"

using namespace cocreate;

namespace {

std::optional<double> none() { return std::nullopt; }

UserProfile flat_profile(double readiness_mean) {
  UserProfile p;
  p.readiness_mean = readiness_mean;
  p.readiness_std = 0.0;
  return p;
}

bool mentions(const std::string& s, const std::string& needle) {
  return s.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("pooled default profile carries the published statistics") {
  UserProfile p = UserProfile::pooled_default();
  CHECK(p.readiness_mean == 5.17);
  CHECK(p.readiness_std == 1.66);
  CHECK(p.calories_mean == 3044.0);
  CHECK(p.calories_std == 867.0);
  CHECK(p.fatigue_mean == 2.71);
  CHECK(p.fatigue_std == 0.62);
  CHECK(p.mood_mean == 3.20);
  CHECK(p.mood_std == 0.63);
  CHECK(p.srpe_mean == 379.0);
  CHECK(p.srpe_std == 265.0);
  CHECK(p.extra_mean(0) == 3044.0);
  CHECK(p.extra_std(1) == 0.62);
  CHECK(p.extra_mean(2) == 3.20);
  CHECK(p.extra_std(3) == 265.0);
  CHECK_NOTHROW(p.validate());

  UserProfile bad = p;
  bad.readiness_std = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.mood_mean = 9.0;  // outside the declared 1..5 range
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("standard scenario shapes and multiplier phases") {
  ScenarioSpec e1 = ScenarioSpec::standard(ScenarioKind::E1, 30);
  CHECK(e1.multipliers == std::vector<double>{1.0});
  CHECK(e1.phase_length == 10);

  ScenarioSpec e2 = ScenarioSpec::standard(ScenarioKind::E2, 30);
  CHECK(e2.multipliers == std::vector<double>{1.0, 1.4});

  ScenarioSpec e3 = ScenarioSpec::standard(ScenarioKind::E3, 30);
  CHECK(e3.multipliers == std::vector<double>{1.0, 2.0});

  ScenarioSpec e4 = ScenarioSpec::standard(ScenarioKind::E4, 30);
  CHECK(e4.multipliers == std::vector<double>{0.8, 1.0, 1.6});

  // Phase p covers [p*len, (p+1)*len); the last multiplier extends onward.
  CHECK(scenario_multiplier(e4, 0) == 0.8);
  CHECK(scenario_multiplier(e4, 9) == 0.8);
  CHECK(scenario_multiplier(e4, 10) == 1.0);
  CHECK(scenario_multiplier(e4, 19) == 1.0);
  CHECK(scenario_multiplier(e4, 20) == 1.6);
  CHECK(scenario_multiplier(e4, 29) == 1.6);
  CHECK(scenario_multiplier(e4, 500) == 1.6);
  CHECK(scenario_multiplier(e2, 25) == 1.4);

  // Short horizons floor the phase length at one step.
  ScenarioSpec short4 = ScenarioSpec::standard(ScenarioKind::E4, 2);
  CHECK(short4.phase_length == 1);
  CHECK(scenario_multiplier(short4, 0) == 0.8);
  CHECK(scenario_multiplier(short4, 1) == 1.0);

  CHECK_THROWS_AS(scenario_multiplier(e1, -1), std::invalid_argument);
}

TEST_CASE("scenario spec validation") {
  ScenarioSpec s;
  s.kind = ScenarioKind::E1;
  s.multipliers = {1.0, 2.0};
  CHECK_THROWS_WITH_AS(s.validate(), "scenario E1 must have the single multiplier 1.0",
                       std::invalid_argument);
  s = ScenarioSpec::standard(ScenarioKind::E2, 30);
  s.multipliers.clear();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = ScenarioSpec::standard(ScenarioKind::E2, 30);
  s.phase_length = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = ScenarioSpec::standard(ScenarioKind::E2, 30);
  s.multipliers = {1.0, -0.5};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);

  CHECK(scenario_from_string("E3") == ScenarioKind::E3);
  CHECK(to_string(ScenarioKind::E4) == "E4");
  CHECK_THROWS_AS(scenario_from_string("E9"), std::invalid_argument);
}

TEST_CASE("engagement sampling scales by the phase multiplier and clamps") {
  // Zero std makes the draw exact: multiplier times the mean.
  ScenarioSpec e3 = ScenarioSpec::standard(ScenarioKind::E3, 30);
  Rng rng(11);
  CHECK(sample_engagement(flat_profile(4.0), e3, 5, rng) == 4.0);
  CHECK(sample_engagement(flat_profile(4.0), e3, 25, rng) == 8.0);
  CHECK(sample_engagement(flat_profile(6.0), e3, 25, rng) == 10.0);  // clamped top
  ScenarioSpec e1 = ScenarioSpec::standard(ScenarioKind::E1, 30);
  for (int i = 0; i < 2000; ++i) {
    double x = sample_engagement(UserProfile::pooled_default(), e1, 0, rng);
    CHECK(x >= 0.0);
    CHECK(x <= 10.0);
  }
  // Same rng state, same draw.
  Rng a(7), b(7);
  CHECK(sample_engagement(UserProfile::pooled_default(), e1, 3, a) ==
        sample_engagement(UserProfile::pooled_default(), e1, 3, b));
}

TEST_CASE("extras are centered on the channel means and clamped to range") {
  ExtrasCoupling coupling;
  CHECK_NOTHROW(coupling.validate());
  ExtrasCoupling bad;
  bad.target_r[1] = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  // A zero-variance channel has zero slope and zero noise, so it sits at its
  // mean exactly, whatever the engagement.
  UserProfile p = UserProfile::pooled_default();
  p.calories_std = 0.0;
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    auto ex = sample_extras(p, coupling, rng.uniform(0.0, 10.0), rng);
    CHECK(ex[0] == 3044.0);
    CHECK(ex[1] >= 1.0);
    CHECK(ex[1] <= 5.0);
    CHECK(ex[2] >= 1.0);
    CHECK(ex[2] <= 5.0);
    CHECK(ex[3] >= 30.0);
    CHECK(ex[3] <= 1800.0);
  }

  // At engagement == readiness mean the slope term vanishes, so the sample
  // mean sits near the channel mean.
  UserProfile q = UserProfile::pooled_default();
  double sum = 0.0;
  const int N = 20000;
  for (int i = 0; i < N; ++i) sum += sample_extras(q, coupling, q.readiness_mean, rng)[0];
  CHECK(sum / N == doctest::Approx(q.calories_mean).epsilon(0.02));

  // Correlation signs follow the coupling targets.
  std::vector<double> xs, mood, fatigue;
  for (int i = 0; i < 4000; ++i) {
    double x = rng.normal(q.readiness_mean, q.readiness_std);
    auto ex = sample_extras(q, coupling, x, rng);
    xs.push_back(x);
    fatigue.push_back(ex[1]);
    mood.push_back(ex[2]);
  }
  CHECK(pearson_correlation(xs, mood) > 0.2);
  CHECK(pearson_correlation(xs, fatigue) < -0.2);
}

TEST_CASE("scenario emulator cycles profiles over the population") {
  std::vector<UserProfile> two = {flat_profile(3.0), flat_profile(7.0)};
  ScenarioEmulator em(two, ScenarioSpec::standard(ScenarioKind::E1, 30));
  CHECK(em.extra_channels() == kNumExtraChannels);

  const int n = 5;
  std::vector<double> x(n), extras(static_cast<std::size_t>(kNumExtraChannels) * n);
  Rng rng(17);
  em.sample(0, n, rng, x, extras);
  CHECK(x == std::vector<double>{3.0, 7.0, 3.0, 7.0, 3.0});

  CHECK_THROWS_AS(ScenarioEmulator({}, ScenarioSpec::standard(ScenarioKind::E1, 30)),
                  std::invalid_argument);

  auto cycled = profiles_for_population(two, 5);
  REQUIRE(cycled.size() == 5);
  CHECK(cycled[0].readiness_mean == 3.0);
  CHECK(cycled[1].readiness_mean == 7.0);
  CHECK(cycled[4].readiness_mean == 3.0);
  CHECK(profiles_for_population(two, 1).size() == 1);
}

TEST_CASE("fixed schedule source replays rows and zero extras") {
  FixedScheduleSource src({{1.0, 2.0}, {3.0, 4.0}}, 4);
  CHECK(src.extra_channels() == 4);
  std::vector<double> x(2), extras(8, 99.0);
  Rng rng(1);
  src.sample(1, 2, rng, x, extras);
  CHECK(x == std::vector<double>{3.0, 4.0});
  for (double e : extras) CHECK(e == 0.0);
  CHECK_THROWS_AS(src.sample(2, 2, rng, x, extras), std::out_of_range);
  std::vector<double> wrong(3);
  CHECK_THROWS_AS(src.sample(0, 3, rng, wrong, extras), std::invalid_argument);
  CHECK_THROWS_AS(FixedScheduleSource({}, 0), std::invalid_argument);
  CHECK_THROWS_AS(FixedScheduleSource({{1.0}, {1.0, 2.0}}, 0), std::invalid_argument);
}

TEST_CASE("lifelog ingest parses the exact schema") {
  const std::string text =
      "participant_id,date,readiness,calories,fatigue,mood,srpe\n"
      "p1,2020-01-05,7,3044,3,4,379\n"
      "p1,2020-01-06,6,,2,5,400\n";
  IngestResult r = ingest_lifelog_text(text, "mem");
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].participant_id == "p1");
  CHECK(r.records[0].date == "2020-01-05");
  CHECK(r.records[0].readiness == 7.0);
  CHECK(r.records[0].calories == 3044.0);
  CHECK(r.records[0].fatigue == 3.0);
  CHECK(r.records[0].mood == 4.0);
  CHECK(r.records[0].srpe == 379.0);
  CHECK(r.records[0].channel(0) == 3044.0);
  CHECK(r.records[0].channel(3) == 379.0);
  CHECK_FALSE(r.records[1].calories.has_value());
  CHECK(r.diagnostics.empty());

  // BOM and CRLF line endings are tolerated.
  IngestResult rb = ingest_lifelog_text(
      "\xef\xbb\xbfparticipant_id,date,readiness,calories,fatigue,mood,srpe\r\n"
      "p1,2020-01-05,7,3044,3,4,379\r\n",
      "mem");
  CHECK(rb.records.size() == 1);
  CHECK(rb.records[0].srpe == 379.0);
}

TEST_CASE("out-of-range lifelog values are flagged, not fatal") {
  const std::string text =
      "participant_id,date,readiness,calories,fatigue,mood,srpe\n"
      "p1,2020-01-05,12,3044,3,4,379\n";
  IngestResult r = ingest_lifelog_text(text, "mem");
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].readiness == 12.0);  // kept as parsed
  REQUIRE(r.diagnostics.size() == 1);
  CHECK(mentions(r.diagnostics[0], "row 2"));
  CHECK(mentions(r.diagnostics[0], "readiness"));
}

TEST_CASE("structural lifelog problems throw with the row number") {
  const std::string header = "participant_id,date,readiness,calories,fatigue,mood,srpe\n";
  CHECK_THROWS_WITH_AS(
      ingest_lifelog_text("id,date,readiness,calories,fatigue,mood,srpe\np1,2020-01-01,5,,,,\n",
                          "mem"),
      doctest::Contains("header mismatch"), std::runtime_error);
  CHECK_THROWS_WITH_AS(ingest_lifelog_text("", "mem"), doctest::Contains("empty file"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(ingest_lifelog_text(header + "p1,2020-01-01,5,100\n", "mem"),
                       doctest::Contains("row 2"), std::runtime_error);
  CHECK_THROWS_WITH_AS(ingest_lifelog_text(header + "p1,01/02/2020,5,2000,2,3,100\n", "mem"),
                       doctest::Contains("2020"), std::runtime_error);
  CHECK_THROWS_WITH_AS(ingest_lifelog_text(header + "p1,2020-13-40,5,2000,2,3,100\n", "mem"),
                       doctest::Contains("2020-13-40"), std::runtime_error);
  CHECK_THROWS_WITH_AS(ingest_lifelog_text(header + "p1,2020-01-01,abc,2000,2,3,100\n", "mem"),
                       doctest::Contains("abc"), std::runtime_error);
  CHECK_THROWS_WITH_AS(ingest_lifelog_text(header + ",2020-01-01,5,2000,2,3,100\n", "mem"),
                       doctest::Contains("participant_id"), std::runtime_error);

  // File variant reports the path in the error.
  namespace fs = std::filesystem;
  const fs::path tmp = fs::temp_directory_path() / "cocreate_bad_lifelog.csv";
  std::ofstream(tmp) << "wrong,header\n";
  CHECK_THROWS_WITH_AS(ingest_lifelog(tmp.string()), doctest::Contains("header mismatch"),
                       std::runtime_error);
  fs::remove(tmp);
  CHECK_THROWS_AS(ingest_lifelog((fs::temp_directory_path() / "nope_missing.csv").string()),
                  std::runtime_error);
}

TEST_CASE("imputation fills gaps linearly or by carry-forward") {
  using V = std::vector<std::optional<double>>;
  CHECK(impute_missing(V{1.0, none(), 3.0}, ImputeMethod::Linear) ==
        std::vector<double>{1.0, 2.0, 3.0});
  CHECK(impute_missing(V{0.0, none(), none(), 3.0}, ImputeMethod::Linear) ==
        std::vector<double>{0.0, 1.0, 2.0, 3.0});
  CHECK(impute_missing(V{5.0, none(), none()}, ImputeMethod::ForwardFill) ==
        std::vector<double>{5.0, 5.0, 5.0});
  CHECK(impute_missing(V{1.0, none(), 3.0}, ImputeMethod::ForwardFill) ==
        std::vector<double>{1.0, 1.0, 3.0});
  // Leading gaps take the nearest present value under either method.
  CHECK(impute_missing(V{none(), 2.0}, ImputeMethod::Linear) == std::vector<double>{2.0, 2.0});
  CHECK(impute_missing(V{none(), 2.0}, ImputeMethod::ForwardFill) ==
        std::vector<double>{2.0, 2.0});
  CHECK(impute_missing(V{none(), none(), 7.0, none()}, ImputeMethod::Linear) ==
        std::vector<double>{7.0, 7.0, 7.0, 7.0});
  // Present values pass through unchanged, so imputation is idempotent.
  std::vector<double> once = impute_missing(V{4.0, none(), 1.0, none()}, ImputeMethod::Linear);
  V wrapped(once.begin(), once.end());
  CHECK(impute_missing(wrapped, ImputeMethod::Linear) == once);
  CHECK_THROWS_AS(impute_missing(V{none(), none()}, ImputeMethod::Linear),
                  std::invalid_argument);
  CHECK_THROWS_AS(impute_missing(V{}, ImputeMethod::Linear), std::invalid_argument);
}

TEST_CASE("pearson correlation matches a hand-checked value") {
  CHECK(pearson_correlation({1.0, 2.0, 3.0}, {6.0, 4.0, 5.0}) == -0.5);
  CHECK(pearson_correlation({1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}) == doctest::Approx(1.0));
  CHECK(pearson_correlation({1.0, 2.0, 3.0}, {9.0, 7.0, 5.0}) == doctest::Approx(-1.0));

  // Symmetry and affine invariance.
  std::vector<double> a = {0.3, 1.8, 2.2, 4.1, 5.0};
  std::vector<double> b = {2.0, 1.1, 3.3, 2.8, 4.4};
  CHECK(pearson_correlation(a, b) == pearson_correlation(b, a));
  std::vector<double> b2;
  for (double v : b) b2.push_back(3.0 * v + 7.0);
  CHECK(pearson_correlation(a, b2) == doctest::Approx(pearson_correlation(a, b)).epsilon(1e-12));

  CHECK_THROWS_AS(pearson_correlation({1.0, 2.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(pearson_correlation({1.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(pearson_correlation({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0}),
                  std::invalid_argument);
}

TEST_CASE("profile fitting uses date order and imputation") {
  auto rec = [](const char* pid, const char* date, std::optional<double> rd,
                std::optional<double> cal) {
    LifelogRecord r;
    r.participant_id = pid;
    r.date = date;
    r.readiness = rd;
    r.calories = cal;
    r.fatigue = 2.0;
    r.mood = 3.0;
    r.srpe = 100.0;
    return r;
  };
  // Interior calorie gap between 100 and 300: date-sorted linear imputation
  // makes the series {100, 200, 300}.  The fatigue/mood/srpe series are
  // constant, which is fine for fitting (only correlation needs variance).
  std::vector<LifelogRecord> recs = {
      rec("p1", "2020-01-03", 2.0, none()),
      rec("p1", "2020-01-01", 1.0, 100.0),
      rec("p1", "2020-01-05", 3.0, 300.0),
  };
  // Make the second fatigue differ so stds are well defined but known.
  recs[0].fatigue = 4.0;
  auto profiles = fit_profiles(recs);
  REQUIRE(profiles.count("p1") == 1);
  const UserProfile& p = profiles.at("p1");
  CHECK(p.calories_mean == 200.0);
  CHECK(p.calories_std == 100.0);  // sample std of {100, 200, 300}
  CHECK(p.readiness_mean == 2.0);
  CHECK(p.readiness_std == 1.0);
  CHECK(p.srpe_std == 0.0);

  // Fewer than two present values in any channel is an error naming both the
  // participant and the channel.
  std::vector<LifelogRecord> sparse = {rec("p9", "2020-01-01", 5.0, none()),
                                       rec("p9", "2020-01-02", 6.0, none())};
  CHECK_THROWS_WITH_AS(fit_profiles(sparse), doctest::Contains("p9"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fit_profiles(sparse), doctest::Contains("calories"),
                       std::runtime_error);
  CHECK(fit_profiles({}).empty());
}
