#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "emgait/classical_ml.hpp"
#include "emgait/dataset_io.hpp"
#include "emgait/gait_labeling.hpp"
#include "emgait/neural.hpp"
#include "emgait/windowing_features.hpp"

namespace emgait::experiment {

// ---- preprocessing ----

struct PreprocessConfig {
  int filter_order = 4;
  double band_low_hz = 20.0;
  double band_high_hz = 300.0;
  double target_rate_hz = 500.0;
  bool anti_alias = false;
  double anti_alias_hz = 225.0;
  double stance_fraction = 0.60;
  labeling::QcOptions qc;
  features::WindowLabelMode label_mode = features::WindowLabelMode::center;
  features::ZcMode zc_mode = features::ZcMode::count;
};

void validate(const PreprocessConfig& cfg);
nlohmann::json to_json(const PreprocessConfig& cfg);
PreprocessConfig preprocess_config_from_json(const nlohmann::json& j);

struct PreprocessStats {
  std::size_t recordings_in = 0;
  std::size_t recordings_kept = 0;
  std::vector<std::string> subjects_kept;
  std::vector<std::string> subjects_rejected;
  std::size_t cycles_kept = 0;
  std::size_t windows = 0;
  std::size_t stance_windows = 0;
  std::size_t swing_windows = 0;

  bool operator==(const PreprocessStats&) const = default;
};

nlohmann::json to_json(const PreprocessStats& s);

struct Dataset {
  features::WindowTensor windows;
  features::FeatureMatrix features;  // unscaled, one row per window
  PreprocessStats stats;
};

/// Cycle QC per recording (a subject with any rejected or too-short leg is
/// dropped entirely), zero-phase band-pass, decimation, per-channel
/// standardization, labeling, windowing, per-recording ZC thresholds, features.
Dataset preprocess(const std::vector<Recording>& recordings, const PreprocessConfig& cfg);

/// Builds a Dataset from stored windows (features recomputed from group thresholds).
Dataset dataset_from_windows(features::WindowTensor windows, features::ZcMode mode = features::ZcMode::count);

// ---- protocol ----

struct SubjectSplit {
  std::vector<std::string> train_subjects;  // sorted
  std::vector<std::string> test_subjects;   // sorted
  std::uint64_t seed = 0;

  bool operator==(const SubjectSplit&) const = default;
};

/// n_test = max(1, round(test_fraction * n)), capped at n - 1. Throws TooFewSubjects for n < 2.
SubjectSplit subject_split(const std::vector<std::string>& subjects, double test_fraction, std::uint64_t seed);

enum class InputKind { features, pca1, pca2, pca3, pca5, raw };
std::string input_kind_name(InputKind k);
InputKind parse_input_kind(const std::string& s);
/// Number of principal components, 0 for features/raw.
std::size_t pca_components(InputKind k) noexcept;

struct ModelsSpec {
  std::vector<ml::ModelKind> classical{ml::ModelKind::nb, ml::ModelKind::dt, ml::ModelKind::rf, ml::ModelKind::lda};
  std::vector<InputKind> inputs{InputKind::features, InputKind::pca1, InputKind::pca2, InputKind::pca3,
                                InputKind::pca5};
  bool dcnn = true;
  ml::SearchSpace search;
  /// When false, classical models use default hyperparameters.
  bool tune = true;
  nn::DcnnConfig dcnn_config;
  int latency_repeats = 3;
};

void validate(const ModelsSpec& spec);
nlohmann::json to_json(const ModelsSpec& spec);
ModelsSpec models_spec_from_json(const nlohmann::json& j);
/// "nb,dt,rf,lda,dcnn" and "features,pca1,..." lists.
void set_models(ModelsSpec& spec, const std::string& csv);
void set_inputs(ModelsSpec& spec, const std::string& csv);

struct ModelResult {
  std::string model;
  std::string input_kind;
  double test_accuracy = 0.0;
  double train_accuracy = 0.0;
  double predict_latency_ms = 0.0;
  double latency_per_window_ms = 0.0;
  nlohmann::json hyperparams;
  double search_score = -1.0;
  /// FNV-1a over the train and test row indices the model actually saw.
  std::string split_digest;
  nlohmann::json training;  // DCNN history summary

  double ratio() const noexcept { return train_accuracy > 0.0 ? test_accuracy / train_accuracy : 0.0; }
  bool operator==(const ModelResult&) const = default;
};

struct TrialResult {
  int trial_index = 0;
  std::uint64_t trial_seed = 0;
  SubjectSplit split;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::string split_digest;
  std::string dcnn_blob_hash;
  std::vector<ModelResult> models;

  bool operator==(const TrialResult&) const = default;
};

std::string split_digest(const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows);

/// One subject-wise split, every requested (model, input) plus the DCNN trained from `initial_weights`.
TrialResult run_trial(const Dataset& data, const ModelsSpec& spec, int trial_index, std::uint64_t trial_seed,
                      double test_fraction, const nn::Blob& initial_weights);

struct Aggregate {
  std::string model;
  std::string input_kind;
  int n = 0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  double min_acc = 0.0;
  double max_acc = 0.0;
  double mean_train_acc = 0.0;
  double mean_ratio = 0.0;
  double mean_latency_ms = 0.0;
  double mean_latency_per_window_ms = 0.0;

  bool operator==(const Aggregate&) const = default;
};

struct ExperimentReport {
  int schema_version = 1;
  int n_trials = 0;
  std::uint64_t base_seed = 0;
  double test_fraction = 0.1;
  nlohmann::json config;
  nlohmann::json preprocessing;
  nlohmann::json environment;
  std::vector<TrialResult> trials;
  std::vector<Aggregate> aggregates;

  const Aggregate* find(const std::string& model, const std::string& input_kind) const;
  bool operator==(const ExperimentReport&) const = default;
};

/// Population statistics per (model, input) in first-seen order.
std::vector<Aggregate> aggregate(const std::vector<TrialResult>& trials);

/// trial_seed(i) = derive_seed(base_seed, i). The DCNN initial weights are
/// generated once from spec.dcnn_config and shared by every trial.
ExperimentReport run_experiment(const Dataset& data, const ModelsSpec& spec, int n_trials, std::uint64_t base_seed,
                                double test_fraction = 0.1);

nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);
/// Report without timing and environment fields; equal across reruns with the same inputs.
nlohmann::json deterministic_view(const ExperimentReport& r);

std::string trials_csv(const ExperimentReport& r);
std::string aggregates_csv(const ExperimentReport& r);

/// Writes report.json, trials.csv and summary.csv into out_dir. Throws IoError.
void emit_report(const ExperimentReport& r, const std::filesystem::path& out_dir);

nlohmann::json environment_metadata();

}  // namespace emgait::experiment
