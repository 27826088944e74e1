#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "emgait/dataset_io.hpp"

namespace emgait::labeling {

struct GaitCycle {
  double start_s = 0.0;
  double end_s = 0.0;
  double duration_s() const noexcept { return end_s - start_s; }
  friend bool operator==(const GaitCycle&, const GaitCycle&) = default;
};

enum class PhaseLabel : std::uint8_t { stance = 0, swing = 1 };
inline constexpr int kNumPhases = 2;

struct LabelStream {
  std::vector<PhaseLabel> labels;
  std::vector<double> gait_percent;
  std::vector<bool> valid_mask;

  std::size_t size() const noexcept { return labels.size(); }
};

/// k strikes -> k-1 consecutive cycles. Throws TooFewEvents for k < 2.
std::vector<GaitCycle> detect_cycles(std::span<const double> heel_strikes_s);

struct QcOptions {
  /// Subject rejected when std(durations) > cv_threshold * mean(durations).
  double cv_threshold = 0.20;
  /// Also reject when the first two retained cycles differ by more than
  /// cv_threshold * mean duration. Off by default.
  bool check_first_pair = false;
};

struct QcResult {
  std::vector<GaitCycle> kept;
  bool subject_rejected = false;
};

/// Drops the first and last cycle and applies the duration-variability rule
/// (population std) to the remainder. Throws TooFewEvents for < 3 cycles.
QcResult qc_filter(std::span<const GaitCycle> cycles, const QcOptions& opts = {});

/// 100 * (t - start) / duration. Throws OutOfCycle unless start <= t < end.
double gait_percent_at(double t_s, const GaitCycle& cycle);

/// stance iff p < 100 * stance_fraction.
PhaseLabel phase_of_percent(double percent, double stance_fraction);

/// Labels `n_samples` samples of a series sampled at out_rate_hz starting at
/// t = 0. Samples outside every kept cycle are invalid (label stance, percent 0).
LabelStream label_samples(std::size_t n_samples, std::span<const GaitCycle> kept_cycles, double stance_fraction,
                          double out_rate_hz);

/// Labels the recording's time base resampled to out_rate_hz; the sample count
/// matches decimating the recording by fs / out_rate_hz.
LabelStream label_samples(const Recording& recording, std::span<const GaitCycle> kept_cycles,
                          double stance_fraction, double out_rate_hz);

}  // namespace emgait::labeling
