#include <doctest.h>

#include <cmath>

#include "emgait/error.hpp"
#include "emgait/gait_labeling.hpp"

using namespace emgait;
using namespace emgait::labeling;

TEST_CASE("detect_cycles pairs consecutive strikes") {
  const std::vector<double> hs{0.0, 1.0, 2.1};
  const auto c = detect_cycles(hs);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == GaitCycle{0.0, 1.0});
  CHECK(c[1] == GaitCycle{1.0, 2.1});
  CHECK(c[1].duration_s() == doctest::Approx(1.1));
  const std::vector<double> one{5.0};
  CHECK_THROWS_AS(detect_cycles(one), Error);
  std::vector<double> fifty(50);
  for (int i = 0; i < 50; ++i) fifty[i] = i * 1.1;
  CHECK(detect_cycles(fifty).size() == 49);
}

namespace {

std::vector<GaitCycle> from_durations(const std::vector<double>& d) {
  std::vector<GaitCycle> out;
  double t = 0.0;
  for (double x : d) {
    out.push_back({t, t + x});
    t += x;
  }
  return out;
}

}  // namespace

TEST_CASE("qc_filter drops the ends and applies the variability rule") {
  const auto same = from_durations(std::vector<double>(49, 1.0));
  auto r = qc_filter(same);
  CHECK(r.kept.size() == 47);
  CHECK_FALSE(r.subject_rejected);
  CHECK(r.kept.front() == same[1]);
  CHECK(r.kept.back() == same[47]);

  std::vector<double> alt;
  for (int i = 0; i < 20; ++i) alt.push_back(i % 2 ? 1.5 : 0.5);
  CHECK(qc_filter(from_durations(alt)).subject_rejected);

  const auto three = from_durations({1.0, 1.2, 0.9});
  r = qc_filter(three);
  REQUIRE(r.kept.size() == 1);
  CHECK(r.kept[0] == three[1]);

  CHECK_THROWS_AS(qc_filter(from_durations({1.0, 1.0})), Error);
}

TEST_CASE("qc threshold boundary uses the population standard deviation") {
  // Middle durations 0.8, 1.2 -> mean 1.0, population std 0.2.
  const auto c = from_durations({5.0, 0.8, 1.2, 5.0});
  CHECK_FALSE(qc_filter(c, {0.2 + 1e-9, false}).subject_rejected);
  CHECK(qc_filter(c, {0.2 - 1e-9, false}).subject_rejected);
}

TEST_CASE("optional first-pair check") {
  const auto c = from_durations({1.0, 0.7, 1.1, 1.1, 1.1, 1.0, 1.0});
  CHECK_FALSE(qc_filter(c).subject_rejected);
  CHECK(qc_filter(c, {0.2, true}).subject_rejected);
}

TEST_CASE("gait percent and phase") {
  const GaitCycle c{2.0, 3.0};
  CHECK(gait_percent_at(2.0, c) == 0.0);
  CHECK(gait_percent_at(2.5, c) == doctest::Approx(50.0));
  CHECK(gait_percent_at(2.6, c) == doctest::Approx(60.0));
  CHECK_THROWS_AS(gait_percent_at(3.0, c), Error);
  CHECK_THROWS_AS(gait_percent_at(1.9, c), Error);
  CHECK(phase_of_percent(0.0, 0.6) == PhaseLabel::stance);
  CHECK(phase_of_percent(59.9, 0.6) == PhaseLabel::stance);
  CHECK(phase_of_percent(60.0, 0.6) == PhaseLabel::swing);
  CHECK(phase_of_percent(99.9, 0.6) == PhaseLabel::swing);
}

TEST_CASE("label_samples on a single one-second cycle") {
  const std::vector<GaitCycle> cycles{{0.0, 1.0}};
  const auto s = label_samples(600, cycles, 0.6, 500.0);
  REQUIRE(s.size() == 600);
  int stance = 0, swing = 0, invalid = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.valid_mask[i]) {
      ++invalid;
      CHECK(s.labels[i] == PhaseLabel::stance);
      CHECK(s.gait_percent[i] == 0.0);
      continue;
    }
    (s.labels[i] == PhaseLabel::stance ? stance : swing)++;
  }
  CHECK(std::abs(stance - 300) <= 1);
  CHECK(std::abs(swing - 200) <= 1);
  CHECK(invalid == 100);
  CHECK(s.gait_percent[0] == 0.0);
}

TEST_CASE("no kept cycles leaves everything invalid") {
  const auto s = label_samples(100, {}, 0.6, 500.0);
  CHECK(std::count(s.valid_mask.begin(), s.valid_mask.end(), true) == 0);
}

TEST_CASE("back-to-back identical cycles repeat with the cycle period") {
  const std::vector<GaitCycle> cycles{{0.0, 1.0}, {1.0, 2.0}};
  const auto s = label_samples(1000, cycles, 0.6, 500.0);
  for (std::size_t i = 0; i < 500; ++i) {
    CHECK(s.labels[i] == s.labels[i + 500]);
    CHECK(s.valid_mask[i + 500]);
  }
}

TEST_CASE("each kept cycle is one stance run followed by one swing run") {
  const std::vector<GaitCycle> cycles{{0.1, 1.17}, {1.17, 2.3}, {2.3, 3.41}};
  const auto s = label_samples(2000, cycles, 0.6, 500.0);
  for (const auto& c : cycles) {
    const auto first = static_cast<std::size_t>(std::ceil(c.start_s * 500.0));
    const auto last = static_cast<std::size_t>(std::ceil(c.end_s * 500.0));
    int transitions = 0;
    std::size_t stance = 0;
    for (std::size_t i = first; i < last; ++i) {
      stance += s.labels[i] == PhaseLabel::stance;
      if (i > first && s.labels[i] != s.labels[i - 1]) {
        ++transitions;
        CHECK(s.labels[i] == PhaseLabel::swing);
      }
    }
    CHECK(transitions == 1);
    CHECK(std::abs(static_cast<double>(stance) - 0.6 * (last - first)) <= 1.0);
  }
}

TEST_CASE("recording overload matches the decimated length") {
  Recording r;
  r.sample_rate_hz = 1500.0;
  for (auto& ch : r.channels) ch.assign(3001, 0.0);
  r.heel_strikes_s = {0.0, 1.0, 2.0};
  const auto cycles = detect_cycles(r.heel_strikes_s);
  const auto s = label_samples(r, cycles, 0.6, 500.0);
  CHECK(s.size() == 1001);
  CHECK(s.valid_mask[999]);
  CHECK_FALSE(s.valid_mask[1000]);
}
