#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "emgait/dsp.hpp"
#include "emgait/error.hpp"

using namespace emgait;
using namespace emgait::dsp;

namespace {

std::vector<double> sine(double f, double fs, std::size_t n, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * i / fs + phase);
  return x;
}

double rms(const std::vector<double>& x, std::size_t from, std::size_t to) {
  double s = 0;
  for (std::size_t i = from; i < to; ++i) s += x[i] * x[i];
  return std::sqrt(s / (to - from));
}

}  // namespace

TEST_CASE("band-pass magnitude matches an independent reference design") {
  // |H(f)| of a 4th-order 20-300 Hz Butterworth band-pass at fs = 1500 Hz,
  // computed offline with a standard filter-design package.
  const auto bp = design_butterworth_bandpass(4, 20.0, 300.0, 1500.0);
  CHECK(bp.sections.size() == 2);
  CHECK(bp.stable());
  const double f[] = {5, 20, 50, 100, 200, 300, 450, 600, 700};
  const double ref[] = {5.575083378156662e-02, 7.071067811865487e-01, 9.973664914570636e-01,
                        9.999475285495304e-01, 9.570424266743174e-01, 7.071067811865475e-01,
                        2.476110760789151e-01, 4.974196901706623e-02, 5.181301076924949e-03};
  for (int i = 0; i < 9; ++i) {
    CAPTURE(f[i]);
    CHECK(std::abs(bp.response(f[i])) == doctest::Approx(ref[i]).epsilon(1e-9));
  }
}

TEST_CASE("low-pass magnitude matches an independent reference design") {
  const auto lp = design_butterworth_lowpass(4, 225.0, 1500.0);
  CHECK(lp.stable());
  const double f[] = {5, 20, 50, 100, 200, 300, 450, 600, 700};
  const double ref[] = {9.999999999999839e-01, 9.999999989519435e-01, 9.999983609068949e-01,
                        9.995417099174222e-01, 8.639039694037866e-01, 2.351102911832875e-01,
                        1.877721201247429e-02, 7.512207143287740e-04, 8.225160661047192e-06};
  for (int i = 0; i < 9; ++i) {
    CAPTURE(f[i]);
    CHECK(std::abs(lp.response(f[i])) == doctest::Approx(ref[i]).epsilon(1e-9));
  }
}

TEST_CASE("band edges sit at -3 dB for one pass") {
  for (double fs : {1500.0, 2000.0}) {
    const auto bp = design_butterworth_bandpass(4, 20.0, 300.0, fs);
    CHECK(bp.magnitude_db(20.0) == doctest::Approx(-3.0103).epsilon(1e-3));
    CHECK(bp.magnitude_db(300.0) == doctest::Approx(-3.0103).epsilon(1e-3));
  }
}

TEST_CASE("invalid band and order are rejected") {
  CHECK_THROWS_AS(design_butterworth_bandpass(4, 300.0, 20.0, 1500.0), Error);
  CHECK_THROWS_AS(design_butterworth_bandpass(4, 20.0, 800.0, 1500.0), Error);
  CHECK_THROWS_AS(design_butterworth_bandpass(4, 0.0, 300.0, 1500.0), Error);
  CHECK_THROWS_AS(design_butterworth_bandpass(3, 20.0, 300.0, 1500.0), Error);
  try {
    design_butterworth_bandpass(4, 20.0, 800.0, 1500.0);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_band);
  }
}

TEST_CASE("lfilter impulse response equals the cascade response") {
  const auto bp = design_butterworth_bandpass(4, 20.0, 300.0, 1500.0);
  std::vector<double> imp(4096, 0.0);
  imp[0] = 1.0;
  const auto h = lfilter(bp, imp);
  // DTFT of the impulse response at 100 Hz.
  std::complex<double> acc = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n) {
    acc += h[n] * std::polar(1.0, -2.0 * std::numbers::pi * 100.0 * n / 1500.0);
  }
  CHECK(std::abs(acc - bp.response(100.0)) < 1e-9);
}

TEST_CASE("filtfilt is zero phase and squares the magnitude") {
  const auto bp = design_butterworth_bandpass(4, 20.0, 300.0, 1500.0);
  const std::size_t n = 6000;
  for (double f : {50.0, 100.0, 200.0}) {
    const auto x = sine(f, 1500.0, n, 0.3);
    const auto y = filtfilt(bp, x);
    const double gain = std::norm(bp.response(f));
    for (std::size_t i = 1000; i < n - 1000; i += 7) CHECK(y[i] == doctest::Approx(gain * x[i]).epsilon(1e-6));
  }
  for (double f : {20.0, 300.0}) {
    const auto x = sine(f, 1500.0, 30000);
    const auto y = filtfilt(bp, x);
    const double db = 20.0 * std::log10(rms(y, 10000, 20000) / rms(x, 10000, 20000));
    CHECK(db == doctest::Approx(-6.0206).epsilon(0.3 / 6.0206));
  }
}

TEST_CASE("filtfilt padding and short input") {
  const auto bp = design_butterworth_bandpass(4, 20.0, 300.0, 1500.0);
  CHECK(filtfilt_padlen(bp) == 12);
  CHECK_THROWS_AS(filtfilt(bp, std::vector<double>(12, 1.0)), Error);
  const auto y = filtfilt(bp, std::vector<double>(13, 1.0));
  CHECK(y.size() == 13);
  const auto lp = design_butterworth_lowpass(4, 225.0, 1500.0);
  const auto c = filtfilt(lp, std::vector<double>(200, 2.5));
  for (double v : c) CHECK(v == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("decimate picks every k-th sample") {
  std::vector<double> x(10);
  for (int i = 0; i < 10; ++i) x[i] = i;
  CHECK(decimate(x, 3) == std::vector<double>{0, 3, 6, 9});
  CHECK(decimate(x, 1) == x);
  CHECK(decimate(x, 4) == std::vector<double>{0, 4, 8});
  CHECK_THROWS_AS(decimate(x, 0), Error);
  CHECK(decimate(std::vector<double>(4500), 3).size() == 1500);
}

TEST_CASE("standardize") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(4.0, 2.5);
  std::vector<double> x(1000);
  for (auto& v : x) v = d(rng);
  const auto s = standardize(x);
  double m = 0, q = 0;
  for (double v : s.samples) m += v;
  m /= s.samples.size();
  for (double v : s.samples) q += (v - m) * (v - m);
  CHECK(std::abs(m) < 1e-12);
  CHECK(std::sqrt(q / s.samples.size()) == doctest::Approx(1.0).epsilon(1e-12));
  const auto again = standardize(s.samples);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(again.samples[i] == doctest::Approx(s.samples[i]).epsilon(1e-9));
  const auto flat = standardize(std::vector<double>(10, 3.0));
  for (double v : flat.samples) CHECK(v == 0.0);
}
