#pragma once

// On-disk recording format, subject filters and the synthetic gait-EMG
// generator.
//
// Layout of a dataset directory:
//   manifest.json
//   <recording dir>/emg.csv      header: t_s,VL,BF,MH,GL,GM
//   <recording dir>/events.csv   header: t_s,leg   (leg is "self" or "opposite")
// Each manifest entry's file_path points at the emg.csv; events.csv is its
// sibling.

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace emgait {

inline constexpr std::size_t kNumChannels = 5;
inline constexpr std::array<std::string_view, kNumChannels> kChannelNames{"VL", "BF", "MH", "GL", "GM"};
inline constexpr double kIngestRateHz = 1500.0;

enum class Leg { dominant, nondominant };

std::string_view leg_name(Leg leg) noexcept;
Leg parse_leg(std::string_view s);

struct Recording {
  std::string subject_id;
  Leg leg = Leg::dominant;
  double sample_rate_hz = kIngestRateHz;
  std::array<std::vector<double>, kNumChannels> channels;
  std::vector<double> heel_strikes_s;
  std::vector<double> opposite_heel_strikes_s;
  bool injury_history = false;

  std::size_t length() const noexcept { return channels[0].size(); }
  /// Time of the last sample, (length - 1) / sample_rate_hz.
  double duration_s() const noexcept;

  friend bool operator==(const Recording&, const Recording&) = default;
};

/// Throws Error on any invariant violation (equal channel lengths >= 2,
/// strictly ascending events inside [0, duration], positive rate).
void validate(const Recording& rec);

struct ManifestEntry {
  std::string subject_id;
  Leg leg = Leg::dominant;
  std::string file_path;  // relative to the manifest's directory, or absolute
  bool injury_history = false;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  double sample_rate_hz = kIngestRateHz;
  std::array<std::string, kNumChannels> channel_names{"VL", "BF", "MH", "GL", "GM"};

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

DatasetManifest read_manifest(const std::filesystem::path& manifest_json);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& manifest_json);

/// Loads one recording. Relative file paths resolve against `base_dir`.
Recording load_recording(const ManifestEntry& entry, double sample_rate_hz,
                         const std::filesystem::path& base_dir = {});
/// Writes emg.csv + events.csv for `rec` into `dir` (created if missing).
/// Values are printed with 17 significant digits so reloading is bit-exact.
void write_recording(const Recording& rec, const std::filesystem::path& dir);

/// Loads every entry of `<data_dir>/manifest.json`.
std::vector<Recording> load_dataset(const std::filesystem::path& data_dir);
/// Writes recordings as `<data_dir>/<subject>_<leg>/` plus manifest.json.
void write_dataset(const std::vector<Recording>& recs, const std::filesystem::path& data_dir);

/// Drops recordings whose subject_id is in `ids`; order preserved. Ids that
/// match nothing are reported on stderr.
std::vector<Recording> exclude_subjects(std::vector<Recording> dataset, const std::set<std::string>& ids);
std::vector<Recording> exclude_injured(std::vector<Recording> dataset);

struct BurstEnvelope {
  double onset_pct = 0.0;
  double offset_pct = 0.0;
  double gain = 0.0;
  friend bool operator==(const BurstEnvelope&, const BurstEnvelope&) = default;
};

struct SyntheticConfig {
  int n_subjects = 12;
  int cycles_per_subject = 49;
  double mean_cycle_s = 1.1;
  double cycle_jitter_frac = 0.05;
  double stance_fraction = 0.60;
  double sample_rate_hz = kIngestRateHz;
  /// Phase offset of the opposite leg's heel strikes, as a fraction of the cycle.
  double opposite_offset_frac = 0.5;
  /// One burst per muscle, in channel order VL, BF, MH, GL, GM.
  std::array<BurstEnvelope, kNumChannels> envelopes{{
      {0.0, 20.0, 1.0},    // VL: loading response
      {62.0, 100.0, 1.0},  // BF: swing deceleration
      {70.0, 100.0, 0.8},  // MH: terminal swing
      {10.0, 58.0, 1.0},   // GL: mid/terminal stance
      {0.0, 60.0, 1.5},    // GM: stance
  }};
  double noise_std = 0.1;
  double corrupt_channel_prob = 0.0;
  bool both_legs = true;

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

void validate(const SyntheticConfig& cfg);
nlohmann::json to_json(const SyntheticConfig& cfg);
/// Missing keys keep their defaults. Throws InvalidConfig.
SyntheticConfig synthetic_config_from_json(const nlohmann::json& j);

/// Deterministic in (config, seed). Subjects are named "S001", "S002", ...;
/// with both_legs each subject yields a dominant and a nondominant recording.
/// Channel value = sum of active burst gains at the current gait percent times
/// a unit-variance 20-300 Hz noise carrier, plus noise_std white noise. A
/// corrupted channel (probability corrupt_channel_prob, drawn per channel per
/// recording) has all gains zeroed.
std::vector<Recording> generate_synthetic(const SyntheticConfig& cfg, std::uint64_t seed);

}  // namespace emgait
