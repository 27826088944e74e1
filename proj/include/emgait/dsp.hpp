#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace emgait::dsp {

/// One second-order section, a0 normalized to 1:
///   y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
  friend bool operator==(const Biquad&, const Biquad&) = default;
};

enum class FilterKind { bandpass, lowpass };

struct FilterDesign {
  FilterKind kind = FilterKind::bandpass;
  int order = 4;
  double low_hz = 20.0;   // unused for lowpass
  double high_hz = 300.0;
  double fs_hz = 1500.0;
  friend bool operator==(const FilterDesign&, const FilterDesign&) = default;
};

struct BiquadCascade {
  std::vector<Biquad> sections;
  FilterDesign design;

  /// Complex response of the full cascade at `freq_hz`.
  std::complex<double> response(double freq_hz) const;
  double magnitude_db(double freq_hz) const;
  /// True when every section's poles lie strictly inside the unit circle.
  bool stable() const;
  /// Coefficients as JSON text.
  std::string to_json() const;
};

/// Digital Butterworth band-pass of total order `order` (even; a 4th-order
/// band-pass is 2 biquads) designed by bilinear transform with pre-warped
/// edges. Unity gain at the geometric centre; -3.01 dB at both edges.
/// Throws InvalidBand unless 0 < low < high < fs/2.
BiquadCascade design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs_hz);

/// Digital Butterworth low-pass (even order), unity DC gain.
BiquadCascade design_butterworth_lowpass(int order, double cutoff_hz, double fs_hz);

/// Single causal pass with zero initial state (direct form II transposed).
std::vector<double> lfilter(const BiquadCascade& filter, std::span<const double> x);

/// Number of samples of odd-reflection padding added to each end by filtfilt:
/// 3 x (2 x sections).
std::size_t filtfilt_padlen(const BiquadCascade& filter) noexcept;

/// Zero-phase forward-backward filtering. Both ends are extended by odd
/// reflection (2*x[0] - x[k]) of filtfilt_padlen samples; the padded signal is
/// filtered forward, reversed, filtered again, reversed and trimmed. The
/// effective magnitude response is |H|^2. Throws SignalTooShort unless
/// x.size() > padlen.
std::vector<double> filtfilt(const BiquadCascade& filter, std::span<const double> x);

/// output[i] = x[i * factor]; length ceil(n / factor). Throws InvalidFactor for factor < 1.
std::vector<double> decimate(std::span<const double> x, int factor);

struct StandardizedSignal {
  std::vector<double> samples;
  double applied_mean = 0.0;
  double applied_std = 0.0;
};

/// (x - mean) / std with the population std. A constant series maps to zeros
/// and records applied_std = 0.
StandardizedSignal standardize(std::span<const double> x);

}  // namespace emgait::dsp
