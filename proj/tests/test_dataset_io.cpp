#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "emgait/dataset_io.hpp"
#include "emgait/error.hpp"
#include "emgait/gait_labeling.hpp"

using namespace emgait;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("emgait_dataset_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

ManifestEntry entry_for(const std::string& dir) { return {"S1", Leg::dominant, dir + "/emg.csv", false}; }

}  // namespace

TEST_CASE("minimal well-formed recording loads") {
  const auto dir = scratch("minimal");
  fs::create_directories(dir / "r");
  write_file(dir / "r/emg.csv", "t_s,VL,BF,MH,GL,GM\n0,1,2,3,4,5\n0.5,1,2,3,4,5\n1,-1,-2,-3,-4,-5\n");
  write_file(dir / "r/events.csv", "t_s,leg\n0,self\n0.5,opposite\n1,self\n");
  const Recording r = load_recording(entry_for("r"), 2.0, dir);
  CHECK(r.length() == 3);
  CHECK(r.channels[4][2] == -5.0);
  CHECK(r.heel_strikes_s == std::vector<double>{0.0, 1.0});
  CHECK(r.opposite_heel_strikes_s == std::vector<double>{0.5});
  CHECK(r.duration_s() == doctest::Approx(1.0));
}

TEST_CASE("malformed files are rejected with the right error") {
  const auto dir = scratch("malformed");
  fs::create_directories(dir / "r");
  write_file(dir / "r/events.csv", "t_s,leg\n0,self\n");

  write_file(dir / "r/emg.csv", "t_s,VL,BF,MH,GL,GM\n0,1,2,3,4\n0.5,1,2,3,4,5\n");
  CHECK_THROWS_WITH_AS(load_recording(entry_for("r"), 2.0, dir), doctest::Contains("MalformedFile"), Error);

  write_file(dir / "r/emg.csv", "t_s,VL,BF\n0,1,2\n");
  CHECK_THROWS_AS(load_recording(entry_for("r"), 2.0, dir), Error);

  write_file(dir / "r/emg.csv", "t_s,VL,BF,MH,GL,GM\n0,1,2,3,4,5\n");
  try {
    load_recording(entry_for("r"), 2.0, dir);
    FAIL("expected EmptyChannel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_channel);
  }

  write_file(dir / "r/emg.csv", "t_s,VL,BF,MH,GL,GM\n0,1,2,3,4,5\n0.5,1,2,3,4,x\n");
  CHECK_THROWS_AS(load_recording(entry_for("r"), 2.0, dir), Error);
}

TEST_CASE("event ordering and range are validated") {
  const auto dir = scratch("events");
  fs::create_directories(dir / "r");
  write_file(dir / "r/emg.csv", "t_s,VL,BF,MH,GL,GM\n0,1,2,3,4,5\n0.5,1,2,3,4,5\n1,1,2,3,4,5\n");
  for (const std::string events : {"t_s,leg\n-0.1,self\n0.5,self\n", "t_s,leg\n0.5,self\n0.2,self\n",
                                   "t_s,leg\n0.5,self\n0.5,self\n", "t_s,leg\n0.2,self\n1.5,self\n"}) {
    write_file(dir / "r/events.csv", events);
    try {
      load_recording(entry_for("r"), 2.0, dir);
      FAIL("expected NonMonotonicEvents");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::non_monotonic_events);
    }
  }
  write_file(dir / "r/events.csv", "t_s,leg\n0.2,left\n");
  CHECK_THROWS_AS(load_recording(entry_for("r"), 2.0, dir), Error);
}

TEST_CASE("write then load is bit-identical for random synthetic recordings") {
  SyntheticConfig cfg;
  cfg.n_subjects = 50;
  cfg.cycles_per_subject = 3;
  cfg.mean_cycle_s = 0.3;
  cfg.corrupt_channel_prob = 0.3;
  const auto recs = generate_synthetic(cfg, 99);
  REQUIRE(recs.size() == 100);
  const auto dir = scratch("roundtrip");
  write_dataset(recs, dir);
  const auto back = load_dataset(dir);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CAPTURE(i);
    CHECK(back[i] == recs[i]);
  }
  const auto manifest = read_manifest(dir / "manifest.json");
  CHECK(manifest.entries.size() == 100);
  CHECK(manifest.channel_names[3] == "GL");
}

TEST_CASE("manifest rejects duplicate subject/leg pairs") {
  const auto dir = scratch("dup");
  DatasetManifest m;
  m.entries = {{"S1", Leg::dominant, "a/emg.csv", false}, {"S1", Leg::dominant, "b/emg.csv", false}};
  write_manifest(m, dir / "manifest.json");
  CHECK_THROWS_AS(read_manifest(dir / "manifest.json"), Error);
}

TEST_CASE("subject exclusion") {
  SyntheticConfig cfg;
  cfg.n_subjects = 61;
  cfg.cycles_per_subject = 3;
  cfg.mean_cycle_s = 0.2;
  cfg.both_legs = false;
  auto recs = generate_synthetic(cfg, 1);
  // Rename subjects to opaque numeric ids 130..190.
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].subject_id = std::to_string(130 + i);
  const auto kept = exclude_subjects(recs, {"151", "176"});
  CHECK(kept.size() == 59);
  for (const auto& r : kept) CHECK((r.subject_id != "151" && r.subject_id != "176"));
  CHECK(exclude_subjects(recs, {}) == recs);
  CHECK(exclude_subjects(recs, {"nobody"}).size() == 61);
  std::set<std::string> all;
  for (const auto& r : recs) all.insert(r.subject_id);
  CHECK(exclude_subjects(recs, all).empty());
  CHECK(kept.front().subject_id == "130");
  CHECK(kept.back().subject_id == "190");
}

TEST_CASE("injury exclusion") {
  SyntheticConfig cfg;
  cfg.n_subjects = 4;
  cfg.cycles_per_subject = 3;
  cfg.mean_cycle_s = 0.2;
  cfg.both_legs = false;
  auto recs = generate_synthetic(cfg, 1);
  CHECK(exclude_injured(recs) == recs);
  recs[2].injury_history = true;
  const auto kept = exclude_injured(recs);
  CHECK(kept.size() == 3);
  for (auto& r : recs) r.injury_history = true;
  CHECK(exclude_injured(recs).empty());
}

TEST_CASE("synthetic generator without jitter places strikes exactly") {
  SyntheticConfig cfg;
  cfg.n_subjects = 1;
  cfg.cycles_per_subject = 3;
  cfg.cycle_jitter_frac = 0.0;
  cfg.mean_cycle_s = 1.0;
  const auto recs = generate_synthetic(cfg, 5);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].heel_strikes_s == std::vector<double>{0.0, 1.0, 2.0, 3.0});
  CHECK(recs[0].subject_id == "S001");
  CHECK(recs[0].duration_s() >= 3.0);
  CHECK(recs[0].opposite_heel_strikes_s.front() == doctest::Approx(0.5));
  CHECK(recs[1].leg == Leg::nondominant);
  CHECK(recs[1].heel_strikes_s == recs[0].opposite_heel_strikes_s);
  validate(recs[0]);
  validate(recs[1]);
}

TEST_CASE("synthetic generator is a pure function of config and seed") {
  SyntheticConfig cfg;
  cfg.n_subjects = 2;
  cfg.cycles_per_subject = 4;
  CHECK(generate_synthetic(cfg, 11) == generate_synthetic(cfg, 11));
  CHECK_FALSE(generate_synthetic(cfg, 11) == generate_synthetic(cfg, 12));
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig cfg;
  cfg.cycles_per_subject = 2;
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), Error);
  cfg = {};
  cfg.envelopes[0] = {50.0, 40.0, 1.0};
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = {};
  cfg.corrupt_channel_prob = 1.5;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = {};
  cfg.noise_std = 0.25;
  cfg.envelopes[1].gain = 2.0;
  CHECK(synthetic_config_from_json(to_json(cfg)) == cfg);
}

namespace {

// Mean power during stance over mean power during swing, per channel.
std::array<double, kNumChannels> stance_swing_power_ratio(const Recording& r) {
  const auto cycles = labeling::detect_cycles(r.heel_strikes_s);
  const auto labels = labeling::label_samples(r.length(), cycles, 0.6, r.sample_rate_hz);
  std::array<double, kNumChannels> ratio{};
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    double ps = 0, pw = 0;
    std::size_t ns = 0, nw = 0;
    for (std::size_t i = 0; i < r.length(); ++i) {
      if (!labels.valid_mask[i]) continue;
      const double e = r.channels[c][i] * r.channels[c][i];
      if (labels.labels[i] == labeling::PhaseLabel::stance) {
        ps += e;
        ++ns;
      } else {
        pw += e;
        ++nw;
      }
    }
    ratio[c] = (ps / ns) / (pw / nw);
  }
  return ratio;
}

}  // namespace

TEST_CASE("corrupted channels carry no phase information") {
  SyntheticConfig cfg;
  cfg.n_subjects = 2;
  cfg.cycles_per_subject = 20;
  cfg.corrupt_channel_prob = 1.0;
  for (const auto& r : generate_synthetic(cfg, 3)) {
    const auto ratio = stance_swing_power_ratio(r);
    for (double q : ratio) CHECK(q == doctest::Approx(1.0).epsilon(0.15));
  }
  cfg.corrupt_channel_prob = 0.0;
  for (const auto& r : generate_synthetic(cfg, 3)) {
    const auto ratio = stance_swing_power_ratio(r);
    CHECK(ratio[4] > 20.0);  // GM active in stance only
    CHECK(ratio[1] < 0.2);   // BF active in swing only
  }
}
