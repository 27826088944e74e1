#include "emgait/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "emgait/error.hpp"

namespace emgait::dsp {
namespace {

using cplx = std::complex<double>;

// Left-half-plane poles of the unit-cutoff analog Butterworth prototype.
std::vector<cplx> prototype_poles(int n) {
  std::vector<cplx> poles;
  for (int k = 0; k < n; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n);
    poles.emplace_back(std::cos(theta), std::sin(theta));
  }
  return poles;
}

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

// Groups digital poles into conjugate pairs (or pairs of real poles) and
// returns the denominators as (a1, a2).
std::vector<std::pair<double, double>> pair_poles(const std::vector<cplx>& poles) {
  std::vector<std::pair<double, double>> dens;
  std::vector<double> reals;
  for (const cplx& z : poles) {
    if (std::abs(z.imag()) <= 1e-12 * std::max(1.0, std::abs(z))) {
      reals.push_back(z.real());
    } else if (z.imag() > 0.0) {
      dens.emplace_back(-2.0 * z.real(), std::norm(z));
    }
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    dens.emplace_back(-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]);
  }
  if (reals.size() % 2 != 0) throw Error(Errc::invalid_config, "unpaired real pole");
  return dens;
}

cplx section_response(const Biquad& s, double omega) {
  const cplx z1 = std::polar(1.0, -omega);
  const cplx z2 = z1 * z1;
  return (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
}

void run_section(const Biquad& s, std::vector<double>& x, bool steady_start = false) {
  double s1 = 0.0, s2 = 0.0;
  if (steady_start && !x.empty()) {
    // state of a section that has seen x[0] forever
    const double u = x[0];
    const double y = u * (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    s2 = s.b2 * u - s.a2 * y;
    s1 = s.b1 * u - s.a1 * y + s2;
  }
  for (double& v : x) {
    const double in = v;
    const double out = s.b0 * in + s1;
    s1 = s.b1 * in - s.a1 * out + s2;
    s2 = s.b2 * in - s.a2 * out;
    v = out;
  }
}

void check_order(int order) {
  if (order < 2 || order % 2 != 0) throw Error(Errc::invalid_config, "filter order must be even and >= 2");
}

}  // namespace

cplx BiquadCascade::response(double freq_hz) const {
  const double omega = 2.0 * std::numbers::pi * freq_hz / design.fs_hz;
  cplx h = 1.0;
  for (const Biquad& s : sections) h *= section_response(s, omega);
  return h;
}

double BiquadCascade::magnitude_db(double freq_hz) const {
  return 20.0 * std::log10(std::abs(response(freq_hz)));
}

bool BiquadCascade::stable() const {
  return std::all_of(sections.begin(), sections.end(), [](const Biquad& s) {
    return std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2;
  });
}

std::string BiquadCascade::to_json() const {
  nlohmann::json j;
  j["kind"] = design.kind == FilterKind::bandpass ? "bandpass" : "lowpass";
  j["order"] = design.order;
  if (design.kind == FilterKind::bandpass) j["low_hz"] = design.low_hz;
  j["high_hz"] = design.high_hz;
  j["fs_hz"] = design.fs_hz;
  j["sections"] = nlohmann::json::array();
  for (const Biquad& s : sections) {
    j["sections"].push_back({{"b0", s.b0}, {"b1", s.b1}, {"b2", s.b2}, {"a1", s.a1}, {"a2", s.a2}});
  }
  return j.dump(2);
}

BiquadCascade design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs_hz) {
  if (!(fs_hz > 0.0) || !(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < fs_hz / 2.0)) {
    throw Error(Errc::invalid_band, "band-pass requires 0 < low < high < fs/2");
  }
  check_order(order);
  const int n = order / 2;

  const double w_lo = 2.0 * fs_hz * std::tan(std::numbers::pi * low_hz / fs_hz);
  const double w_hi = 2.0 * fs_hz * std::tan(std::numbers::pi * high_hz / fs_hz);
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;

  std::vector<cplx> digital;
  for (const cplx& p : prototype_poles(n)) {
    const cplx a = p * bw / 2.0;
    const cplx root = std::sqrt(a * a - w0_sq);
    digital.push_back(bilinear(a + root, fs_hz));
    digital.push_back(bilinear(a - root, fs_hz));
  }

  BiquadCascade out;
  out.design = {FilterKind::bandpass, order, low_hz, high_hz, fs_hz};
  for (auto [a1, a2] : pair_poles(digital)) out.sections.push_back({1.0, 0.0, -1.0, a1, a2});

  // Unity gain at the digital image of the analog centre frequency.
  const double omega0 = 2.0 * std::atan(std::sqrt(w0_sq) / (2.0 * fs_hz));
  const double centre_hz = omega0 * fs_hz / (2.0 * std::numbers::pi);
  const double per_section = std::pow(1.0 / std::abs(out.response(centre_hz)), 1.0 / out.sections.size());
  for (Biquad& s : out.sections) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
  return out;
}

BiquadCascade design_butterworth_lowpass(int order, double cutoff_hz, double fs_hz) {
  if (!(fs_hz > 0.0) || !(cutoff_hz > 0.0) || !(cutoff_hz < fs_hz / 2.0)) {
    throw Error(Errc::invalid_band, "low-pass requires 0 < cutoff < fs/2");
  }
  check_order(order);
  const double wc = 2.0 * fs_hz * std::tan(std::numbers::pi * cutoff_hz / fs_hz);

  std::vector<cplx> digital;
  for (const cplx& p : prototype_poles(order)) digital.push_back(bilinear(p * wc, fs_hz));

  BiquadCascade out;
  out.design = {FilterKind::lowpass, order, 0.0, cutoff_hz, fs_hz};
  for (auto [a1, a2] : pair_poles(digital)) {
    const double g = (1.0 + a1 + a2) / 4.0;
    out.sections.push_back({g, 2.0 * g, g, a1, a2});
  }
  return out;
}

std::vector<double> lfilter(const BiquadCascade& filter, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  for (const Biquad& s : filter.sections) run_section(s, y);
  return y;
}

std::size_t filtfilt_padlen(const BiquadCascade& filter) noexcept {
  return 3 * (2 * filter.sections.size());
}

std::vector<double> filtfilt(const BiquadCascade& filter, std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t pad = filtfilt_padlen(filter);
  if (n <= pad) throw Error(Errc::signal_too_short, "filtfilt needs more samples than the padding length");

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  for (const Biquad& s : filter.sections) run_section(s, ext, true);
  std::reverse(ext.begin(), ext.end());
  for (const Biquad& s : filter.sections) run_section(s, ext, true);
  std::reverse(ext.begin(), ext.end());

  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::vector<double> decimate(std::span<const double> x, int factor) {
  if (factor < 1) throw Error(Errc::invalid_factor, "decimation factor must be >= 1");
  const auto f = static_cast<std::size_t>(factor);
  std::vector<double> out;
  out.reserve((x.size() + f - 1) / f);
  for (std::size_t i = 0; i < x.size(); i += f) out.push_back(x[i]);
  return out;
}

StandardizedSignal standardize(std::span<const double> x) {
  StandardizedSignal out;
  if (x.empty()) return out;
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);

  out.applied_mean = mean;
  out.samples.resize(x.size(), 0.0);
  // Guard against series whose spread is pure rounding noise.
  if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
    out.applied_std = sd;
    for (std::size_t i = 0; i < x.size(); ++i) out.samples[i] = (x[i] - mean) / sd;
  }
  return out;
}

}  // namespace emgait::dsp
