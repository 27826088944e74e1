#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emgait/dataset_io.hpp"
#include "emgait/gait_labeling.hpp"
#include "emgait/matrix.hpp"

namespace emgait::features {

inline constexpr std::size_t kWindowLen = 40;  // 80 ms at 500 Hz
inline constexpr std::size_t kStride = 16;     // 32 ms at 500 Hz
inline constexpr std::size_t kFeaturesPerChannel = 4;
inline constexpr std::size_t kNumFeatures = kFeaturesPerChannel * kNumChannels;

using labeling::PhaseLabel;

struct ZcThresholds {
  std::array<double, kNumChannels> theta{};
  friend bool operator==(const ZcThresholds&, const ZcThresholds&) = default;
};

enum class WindowLabelMode { center, majority };

/// Windows laid out [window][sample][channel]. Each window also carries the
/// index of the recording it was cut from (`group`) so per-recording zero
/// crossing thresholds can follow it.
struct WindowTensor {
  std::size_t window_len = kWindowLen;
  std::size_t stride = kStride;
  std::vector<double> data;
  std::vector<PhaseLabel> labels;
  std::vector<std::string> subject_ids;
  std::vector<std::uint32_t> group;
  std::vector<ZcThresholds> group_thresholds;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t window_values() const noexcept { return window_len * kNumChannels; }
  std::span<const double> window(std::size_t i) const {
    return {data.data() + i * window_values(), window_values()};
  }
  /// Appends `other`, re-basing its group indices.
  void append(const WindowTensor& other);
  WindowTensor select(std::span<const std::size_t> indices) const;
};

/// Cuts windows of `win` samples every `stride` samples inside each maximal
/// run of valid samples (windows restart at every run start). Labels come from
/// the centre sample (start + win/2) or the majority over the window (ties go
/// to stance). Throws SignalTooShort when the series are shorter than `win`.
WindowTensor make_windows(const std::array<std::vector<double>, kNumChannels>& signals,
                          const labeling::LabelStream& labels, const std::string& subject_id,
                          std::size_t win = kWindowLen, std::size_t stride = kStride,
                          WindowLabelMode mode = WindowLabelMode::center);

/// floor((run - win) / stride) + 1 for run >= win, else 0.
std::size_t windows_in_run(std::size_t run, std::size_t win = kWindowLen, std::size_t stride = kStride) noexcept;

enum class ZcMode {
  /// Thresholded sign-change count.
  count,
  /// Half the sum of sgn(x_i x_{i+1}) u(|x_i - x_{i+1}| - theta), u(0) = 1.
  literal,
};

/// Number of i with x_i * x_{i+1} < 0 and |x_i - x_{i+1}| >= theta.
std::size_t zc(std::span<const double> w, double theta);
double zc_literal(std::span<const double> w, double theta);
double mav(std::span<const double> w);
/// Population standard deviation.
double std_dev(std::span<const double> w);
/// Mean absolute deviation about the mean.
double mad(std::span<const double> w);

/// theta[c] = 0.03 * mean(|x_c|), over samples where `valid` is true (all
/// samples when `valid` is empty).
ZcThresholds compute_thresholds(const std::array<std::vector<double>, kNumChannels>& signals,
                                const std::vector<bool>& valid = {});

struct FeatureMatrix {
  Matrix X;
  std::vector<std::string> feature_names;
  std::vector<PhaseLabel> labels;
  std::vector<std::string> subject_ids;

  std::size_t size() const noexcept { return X.rows(); }
  FeatureMatrix select(std::span<const std::size_t> indices) const;
};

/// "VL_ZC", "VL_MAV", "VL_SD", "VL_MAD", "BF_ZC", ...
std::vector<std::string> feature_names();

/// Row i = [ZC, MAV, SD, MAD] of window i for each channel in order, using
/// one threshold set for every window.
FeatureMatrix extract_features(const WindowTensor& tensor, const ZcThresholds& thresholds,
                               ZcMode mode = ZcMode::count);
/// Same, with each window using its group's thresholds.
FeatureMatrix extract_features(const WindowTensor& tensor, ZcMode mode = ZcMode::count);

struct FeatureScaler {
  std::vector<double> means;
  std::vector<double> stds;
  bool fitted = false;
};

/// Column means and population stds of the training rows.
FeatureScaler fit_scaler(const Matrix& X_train);
/// (X - mean) / std per column; zero-std columns map to 0. Throws NotFitted.
Matrix apply_scaler(const FeatureScaler& scaler, const Matrix& X);

}  // namespace emgait::features
