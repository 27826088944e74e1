#include "emgait/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "emgait/dsp.hpp"
#include "emgait/error.hpp"
#include "emgait/rng.hpp"

namespace fs = std::filesystem;

namespace emgait {
namespace {

constexpr std::string_view kEmgHeader = "t_s,VL,BF,MH,GL,GM";
constexpr std::string_view kEventsHeader = "t_s,leg";
constexpr std::size_t kEmgColumns = 1 + kNumChannels;

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

double parse_double(std::string_view s, const fs::path& file, std::size_t line_no) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(Errc::malformed_file, file.string() + ":" + std::to_string(line_no) + ": not a number '" +
                                          std::string(s) + "'");
  }
  return v;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::io_error, "cannot open " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + p.string());
  return out;
}

void check_events(const std::vector<double>& events, double duration, std::string_view what) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!(events[i] >= 0.0) || !(events[i] <= duration)) {
      throw Error(Errc::non_monotonic_events,
                  std::string(what) + " event outside [0, duration]: " + std::to_string(events[i]));
    }
    if (i > 0 && !(events[i] > events[i - 1])) {
      throw Error(Errc::non_monotonic_events, std::string(what) + " events not strictly ascending");
    }
  }
}

}  // namespace

std::string_view leg_name(Leg leg) noexcept { return leg == Leg::dominant ? "dominant" : "nondominant"; }

Leg parse_leg(std::string_view s) {
  if (s == "dominant") return Leg::dominant;
  if (s == "nondominant") return Leg::nondominant;
  throw Error(Errc::malformed_file, "unknown leg '" + std::string(s) + "'");
}

double Recording::duration_s() const noexcept {
  const std::size_t n = length();
  return n == 0 ? 0.0 : static_cast<double>(n - 1) / sample_rate_hz;
}

void validate(const Recording& rec) {
  if (!(rec.sample_rate_hz > 0.0)) throw Error(Errc::invalid_config, "sample_rate_hz must be positive");
  const std::size_t n = rec.channels[0].size();
  for (const auto& ch : rec.channels) {
    if (ch.size() != n) throw Error(Errc::malformed_file, "channel lengths differ");
  }
  if (n < 2) throw Error(Errc::empty_channel, "recording needs at least 2 samples");
  check_events(rec.heel_strikes_s, rec.duration_s(), "heel strike");
  check_events(rec.opposite_heel_strikes_s, rec.duration_s(), "opposite heel strike");
}

DatasetManifest read_manifest(const fs::path& manifest_json) {
  auto in = open_in(manifest_json);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_file, manifest_json.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    const auto names = j.at("channel_names").get<std::vector<std::string>>();
    if (names.size() != kNumChannels) throw Error(Errc::malformed_file, "channel_names must list 5 channels");
    std::copy(names.begin(), names.end(), m.channel_names.begin());
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("subject_id").get<std::string>(), parse_leg(e.at("leg").get<std::string>()),
                           e.at("file_path").get<std::string>(), e.at("injury_history").get<bool>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_file, manifest_json.string() + ": " + e.what());
  }
  std::set<std::pair<std::string, Leg>> seen;
  for (const auto& e : m.entries) {
    if (!seen.emplace(e.subject_id, e.leg).second) {
      throw Error(Errc::malformed_file, "duplicate manifest entry for " + e.subject_id + "/" +
                                            std::string(leg_name(e.leg)));
    }
  }
  return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& manifest_json) {
  nlohmann::json j;
  j["sample_rate_hz"] = m.sample_rate_hz;
  j["channel_names"] = m.channel_names;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    j["entries"].push_back({{"subject_id", e.subject_id},
                            {"leg", leg_name(e.leg)},
                            {"file_path", e.file_path},
                            {"injury_history", e.injury_history}});
  }
  auto out = open_out(manifest_json);
  out << j.dump(2) << '\n';
}

Recording load_recording(const ManifestEntry& entry, double sample_rate_hz, const fs::path& base_dir) {
  fs::path emg_path = entry.file_path;
  if (emg_path.is_relative() && !base_dir.empty()) emg_path = base_dir / emg_path;
  const fs::path events_path = emg_path.parent_path() / "events.csv";

  Recording rec;
  rec.subject_id = entry.subject_id;
  rec.leg = entry.leg;
  rec.sample_rate_hz = sample_rate_hz;
  rec.injury_history = entry.injury_history;

  {
    auto in = open_in(emg_path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kEmgHeader) {
      throw Error(Errc::malformed_file, emg_path.string() + ": expected header " + std::string(kEmgHeader));
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto cols = split_csv(line);
      if (cols.size() != kEmgColumns) {
        throw Error(Errc::malformed_file, emg_path.string() + ":" + std::to_string(line_no) + ": expected " +
                                              std::to_string(kEmgColumns) + " columns, got " +
                                              std::to_string(cols.size()));
      }
      parse_double(cols[0], emg_path, line_no);
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        rec.channels[c].push_back(parse_double(cols[c + 1], emg_path, line_no));
      }
    }
  }
  if (rec.length() < 2) throw Error(Errc::empty_channel, emg_path.string() + ": fewer than 2 samples");

  {
    auto in = open_in(events_path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kEventsHeader) {
      throw Error(Errc::malformed_file, events_path.string() + ": expected header " + std::string(kEventsHeader));
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto cols = split_csv(line);
      if (cols.size() != 2) {
        throw Error(Errc::malformed_file, events_path.string() + ":" + std::to_string(line_no) +
                                              ": expected 2 columns");
      }
      const double t = parse_double(cols[0], events_path, line_no);
      const auto which = trim(cols[1]);
      if (which == "self") {
        rec.heel_strikes_s.push_back(t);
      } else if (which == "opposite") {
        rec.opposite_heel_strikes_s.push_back(t);
      } else {
        throw Error(Errc::malformed_file, events_path.string() + ":" + std::to_string(line_no) +
                                              ": leg must be self or opposite");
      }
    }
  }
  validate(rec);
  return rec;
}

void write_recording(const Recording& rec, const fs::path& dir) {
  validate(rec);
  fs::create_directories(dir);
  {
    std::string buf;
    buf.reserve(rec.length() * 6 * 24);
    buf.append(kEmgHeader).push_back('\n');
    for (std::size_t i = 0; i < rec.length(); ++i) {
      append_double(buf, static_cast<double>(i) / rec.sample_rate_hz);
      for (const auto& ch : rec.channels) {
        buf.push_back(',');
        append_double(buf, ch[i]);
      }
      buf.push_back('\n');
    }
    auto out = open_out(dir / "emg.csv");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  {
    std::string buf(kEventsHeader);
    buf.push_back('\n');
    for (double t : rec.heel_strikes_s) {
      append_double(buf, t);
      buf.append(",self\n");
    }
    for (double t : rec.opposite_heel_strikes_s) {
      append_double(buf, t);
      buf.append(",opposite\n");
    }
    auto out = open_out(dir / "events.csv");
    out << buf;
  }
}

std::vector<Recording> load_dataset(const fs::path& data_dir) {
  const DatasetManifest m = read_manifest(data_dir / "manifest.json");
  std::vector<Recording> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) out.push_back(load_recording(e, m.sample_rate_hz, data_dir));
  return out;
}

void write_dataset(const std::vector<Recording>& recs, const fs::path& data_dir) {
  fs::create_directories(data_dir);
  DatasetManifest m;
  if (!recs.empty()) m.sample_rate_hz = recs.front().sample_rate_hz;
  for (const auto& r : recs) {
    if (r.sample_rate_hz != m.sample_rate_hz) {
      throw Error(Errc::invalid_config, "all recordings in a dataset must share one sample rate");
    }
    const std::string sub = r.subject_id + "_" + std::string(leg_name(r.leg));
    write_recording(r, data_dir / sub);
    m.entries.push_back({r.subject_id, r.leg, sub + "/emg.csv", r.injury_history});
  }
  write_manifest(m, data_dir / "manifest.json");
}

std::vector<Recording> exclude_subjects(std::vector<Recording> dataset, const std::set<std::string>& ids) {
  std::set<std::string> unmatched = ids;
  std::vector<Recording> out;
  out.reserve(dataset.size());
  for (auto& r : dataset) {
    if (ids.contains(r.subject_id)) {
      unmatched.erase(r.subject_id);
    } else {
      out.push_back(std::move(r));
    }
  }
  for (const auto& id : unmatched) std::cerr << "exclude_subjects: unknown subject id '" << id << "' ignored\n";
  return out;
}

std::vector<Recording> exclude_injured(std::vector<Recording> dataset) {
  std::erase_if(dataset, [](const Recording& r) { return r.injury_history; });
  return dataset;
}

void validate(const SyntheticConfig& cfg) {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_config, msg); };
  if (cfg.n_subjects < 1) fail("n_subjects must be >= 1");
  if (cfg.cycles_per_subject < 3) fail("cycles_per_subject must be >= 3");
  if (!(cfg.mean_cycle_s > 0.0)) fail("mean_cycle_s must be positive");
  if (!(cfg.cycle_jitter_frac >= 0.0 && cfg.cycle_jitter_frac < 0.5)) fail("cycle_jitter_frac must be in [0, 0.5)");
  if (!(cfg.stance_fraction > 0.0 && cfg.stance_fraction < 1.0)) fail("stance_fraction must be in (0, 1)");
  if (!(cfg.sample_rate_hz > 600.0)) fail("sample_rate_hz must exceed 600 Hz for the 20-300 Hz carrier");
  if (!(cfg.opposite_offset_frac > 0.0 && cfg.opposite_offset_frac < 1.0)) fail("opposite_offset_frac must be in (0, 1)");
  for (const auto& e : cfg.envelopes) {
    if (!(e.onset_pct >= 0.0 && e.onset_pct < e.offset_pct && e.offset_pct <= 100.0)) {
      fail("envelope needs 0 <= onset_pct < offset_pct <= 100");
    }
  }
  if (!(cfg.noise_std >= 0.0)) fail("noise_std must be >= 0");
  if (!(cfg.corrupt_channel_prob >= 0.0 && cfg.corrupt_channel_prob <= 1.0)) {
    fail("corrupt_channel_prob must be in [0, 1]");
  }
}

nlohmann::json to_json(const SyntheticConfig& c) {
  nlohmann::json env = nlohmann::json::array();
  for (std::size_t i = 0; i < kNumChannels; ++i) {
    env.push_back({{"channel", kChannelNames[i]},
                   {"onset_pct", c.envelopes[i].onset_pct},
                   {"offset_pct", c.envelopes[i].offset_pct},
                   {"gain", c.envelopes[i].gain}});
  }
  return {{"n_subjects", c.n_subjects},
          {"cycles_per_subject", c.cycles_per_subject},
          {"mean_cycle_s", c.mean_cycle_s},
          {"cycle_jitter_frac", c.cycle_jitter_frac},
          {"stance_fraction", c.stance_fraction},
          {"sample_rate_hz", c.sample_rate_hz},
          {"opposite_offset_frac", c.opposite_offset_frac},
          {"envelopes", env},
          {"noise_std", c.noise_std},
          {"corrupt_channel_prob", c.corrupt_channel_prob},
          {"both_legs", c.both_legs}};
}

SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  try {
    c.n_subjects = j.value("n_subjects", c.n_subjects);
    c.cycles_per_subject = j.value("cycles_per_subject", c.cycles_per_subject);
    c.mean_cycle_s = j.value("mean_cycle_s", c.mean_cycle_s);
    c.cycle_jitter_frac = j.value("cycle_jitter_frac", c.cycle_jitter_frac);
    c.stance_fraction = j.value("stance_fraction", c.stance_fraction);
    c.sample_rate_hz = j.value("sample_rate_hz", c.sample_rate_hz);
    c.opposite_offset_frac = j.value("opposite_offset_frac", c.opposite_offset_frac);
    if (j.contains("envelopes")) {
      const auto& env = j.at("envelopes");
      if (env.size() != kNumChannels) throw Error(Errc::invalid_config, "envelopes needs one entry per channel");
      for (std::size_t i = 0; i < kNumChannels; ++i) {
        c.envelopes[i] = {env[i].at("onset_pct").get<double>(), env[i].at("offset_pct").get<double>(),
                          env[i].at("gain").get<double>()};
      }
    }
    c.noise_std = j.value("noise_std", c.noise_std);
    c.corrupt_channel_prob = j.value("corrupt_channel_prob", c.corrupt_channel_prob);
    c.both_legs = j.value("both_legs", c.both_legs);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, std::string("synthetic config: ") + e.what());
  }
  validate(c);
  return c;
}

namespace {

// Gait percent of every sample, extrapolating the first/last cycle period
// outside the strike range so the signal is periodic throughout.
std::vector<double> percent_track(const std::vector<double>& strikes, std::size_t n, double fs) {
  std::vector<double> pct(n);
  std::size_t k = 0;
  const std::size_t last = strikes.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    while (k + 1 < last && t >= strikes[k + 1]) ++k;
    const double start = strikes[k];
    const double dur = strikes[k + 1] - strikes[k];
    double p = 100.0 * (t - start) / dur;
    p = std::fmod(p, 100.0);
    if (p < 0.0) p += 100.0;
    pct[i] = p;
  }
  return pct;
}

Recording synth_leg(const SyntheticConfig& cfg, const std::string& subject, Leg leg, std::vector<double> strikes,
                    std::vector<double> opposite, std::size_t n, const dsp::BiquadCascade& carrier_filter,
                    std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution corrupt(cfg.corrupt_channel_prob);

  Recording rec;
  rec.subject_id = subject;
  rec.leg = leg;
  rec.sample_rate_hz = cfg.sample_rate_hz;
  rec.heel_strikes_s = std::move(strikes);
  rec.opposite_heel_strikes_s = std::move(opposite);

  std::array<bool, kNumChannels> corrupted{};
  for (auto& c : corrupted) c = corrupt(rng);

  const std::vector<double> pct = percent_track(rec.heel_strikes_s, n, cfg.sample_rate_hz);
  std::vector<double> white(n);
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    for (double& w : white) w = gauss(rng);
    std::vector<double> carrier = dsp::lfilter(carrier_filter, white);
    double ss = 0.0;
    for (double v : carrier) ss += v * v;
    const double scale = ss > 0.0 ? 1.0 / std::sqrt(ss / static_cast<double>(n)) : 0.0;

    const BurstEnvelope& env = cfg.envelopes[c];
    const double gain = corrupted[c] ? 0.0 : env.gain;
    auto& out = rec.channels[c];
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool active = pct[i] >= env.onset_pct && pct[i] < env.offset_pct;
      out[i] = (active ? gain : 0.0) * carrier[i] * scale + cfg.noise_std * gauss(rng);
    }
  }
  return rec;
}

}  // namespace

std::vector<Recording> generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const auto carrier_filter = dsp::design_butterworth_bandpass(4, 20.0, 300.0, cfg.sample_rate_hz);
  std::vector<Recording> out;

  for (int s = 0; s < cfg.n_subjects; ++s) {
    const std::uint64_t subject_seed = derive_seed(seed, static_cast<std::uint64_t>(s));
    Rng rng(subject_seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    std::vector<double> durations(static_cast<std::size_t>(cfg.cycles_per_subject));
    for (double& d : durations) d = cfg.mean_cycle_s * (1.0 + cfg.cycle_jitter_frac * unit(rng));

    std::vector<double> strikes{0.0};
    for (double d : durations) strikes.push_back(strikes.back() + d);
    std::vector<double> opposite;
    for (std::size_t k = 0; k < durations.size(); ++k) {
      opposite.push_back(strikes[k] + cfg.opposite_offset_frac * durations[k]);
    }

    const double total = strikes.back();
    const auto n = static_cast<std::size_t>(std::ceil(total * cfg.sample_rate_hz - 1e-9)) + 1;

    char name[16];
    std::snprintf(name, sizeof(name), "S%03d", s + 1);

    out.push_back(synth_leg(cfg, name, Leg::dominant, strikes, opposite, n, carrier_filter,
                            derive_seed(subject_seed, 1)));
    if (cfg.both_legs) {
      out.push_back(synth_leg(cfg, name, Leg::nondominant, opposite, strikes, n, carrier_filter,
                              derive_seed(subject_seed, 2)));
    }
  }
  return out;
}

}  // namespace emgait
