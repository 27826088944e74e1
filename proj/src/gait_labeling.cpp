#include "emgait/gait_labeling.hpp"

#include <cmath>

#include "emgait/error.hpp"

namespace emgait::labeling {

std::vector<GaitCycle> detect_cycles(std::span<const double> heel_strikes_s) {
  if (heel_strikes_s.size() < 2) throw Error(Errc::too_few_events, "need at least 2 heel strikes");
  std::vector<GaitCycle> cycles;
  cycles.reserve(heel_strikes_s.size() - 1);
  for (std::size_t i = 0; i + 1 < heel_strikes_s.size(); ++i) {
    if (!(heel_strikes_s[i + 1] > heel_strikes_s[i])) {
      throw Error(Errc::non_monotonic_events, "heel strikes must be strictly ascending");
    }
    cycles.push_back({heel_strikes_s[i], heel_strikes_s[i + 1]});
  }
  return cycles;
}

QcResult qc_filter(std::span<const GaitCycle> cycles, const QcOptions& opts) {
  if (cycles.size() < 3) throw Error(Errc::too_few_events, "quality control needs at least 3 cycles");
  QcResult out;
  out.kept.assign(cycles.begin() + 1, cycles.end() - 1);

  const double n = static_cast<double>(out.kept.size());
  double mean = 0.0;
  for (const auto& c : out.kept) mean += c.duration_s();
  mean /= n;
  double ss = 0.0;
  for (const auto& c : out.kept) ss += (c.duration_s() - mean) * (c.duration_s() - mean);
  const double sd = std::sqrt(ss / n);

  out.subject_rejected = sd > opts.cv_threshold * mean;
  if (opts.check_first_pair && out.kept.size() >= 2) {
    const double diff = std::abs(out.kept[0].duration_s() - out.kept[1].duration_s());
    if (diff > opts.cv_threshold * mean) out.subject_rejected = true;
  }
  return out;
}

double gait_percent_at(double t_s, const GaitCycle& cycle) {
  if (!(t_s >= cycle.start_s && t_s < cycle.end_s)) {
    throw Error(Errc::out_of_cycle, "time " + std::to_string(t_s) + " is outside the cycle");
  }
  return 100.0 * (t_s - cycle.start_s) / cycle.duration_s();
}

PhaseLabel phase_of_percent(double percent, double stance_fraction) {
  return percent < 100.0 * stance_fraction ? PhaseLabel::stance : PhaseLabel::swing;
}

LabelStream label_samples(std::size_t n_samples, std::span<const GaitCycle> kept_cycles, double stance_fraction,
                          double out_rate_hz) {
  if (!(out_rate_hz > 0.0)) throw Error(Errc::invalid_config, "out_rate_hz must be positive");
  LabelStream s;
  s.labels.assign(n_samples, PhaseLabel::stance);
  s.gait_percent.assign(n_samples, 0.0);
  s.valid_mask.assign(n_samples, false);

  for (const GaitCycle& c : kept_cycles) {
    auto first = static_cast<std::ptrdiff_t>(std::ceil(c.start_s * out_rate_hz - 1e-9));
    first = std::max<std::ptrdiff_t>(first, 0);
    for (auto i = static_cast<std::size_t>(first); i < n_samples; ++i) {
      const double t = static_cast<double>(i) / out_rate_hz;
      if (t < c.start_s) continue;
      if (t >= c.end_s) break;
      const double p = gait_percent_at(t, c);
      s.gait_percent[i] = p;
      s.labels[i] = phase_of_percent(p, stance_fraction);
      s.valid_mask[i] = true;
    }
  }
  return s;
}

LabelStream label_samples(const Recording& recording, std::span<const GaitCycle> kept_cycles,
                          double stance_fraction, double out_rate_hz) {
  const double ratio = recording.sample_rate_hz / out_rate_hz;
  const auto factor = static_cast<std::size_t>(std::llround(ratio));
  std::size_t n_out = 0;
  if (factor >= 1 && std::abs(ratio - static_cast<double>(factor)) < 1e-9) {
    n_out = (recording.length() + factor - 1) / factor;
  } else {
    n_out = static_cast<std::size_t>(std::floor(recording.duration_s() * out_rate_hz + 1e-9)) + 1;
  }
  return label_samples(n_out, kept_cycles, stance_fraction, out_rate_hz);
}

}  // namespace emgait::labeling
