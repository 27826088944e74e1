#include "emgait/windowing_features.hpp"

#include <cmath>

#include "emgait/error.hpp"
#include "emgait/simd/kernels.hpp"

namespace emgait::features {

void WindowTensor::append(const WindowTensor& other) {
  if (other.window_len != window_len) throw Error(Errc::shape_mismatch, "window length differs");
  const auto base = static_cast<std::uint32_t>(group_thresholds.size());
  data.insert(data.end(), other.data.begin(), other.data.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  subject_ids.insert(subject_ids.end(), other.subject_ids.begin(), other.subject_ids.end());
  for (std::uint32_t g : other.group) group.push_back(base + g);
  group_thresholds.insert(group_thresholds.end(), other.group_thresholds.begin(), other.group_thresholds.end());
}

WindowTensor WindowTensor::select(std::span<const std::size_t> indices) const {
  WindowTensor out;
  out.window_len = window_len;
  out.stride = stride;
  out.group_thresholds = group_thresholds;
  out.data.reserve(indices.size() * window_values());
  for (std::size_t i : indices) {
    const auto w = window(i);
    out.data.insert(out.data.end(), w.begin(), w.end());
    out.labels.push_back(labels[i]);
    out.subject_ids.push_back(subject_ids[i]);
    out.group.push_back(group.empty() ? 0 : group[i]);
  }
  return out;
}

std::size_t windows_in_run(std::size_t run, std::size_t win, std::size_t stride) noexcept {
  return run < win ? 0 : (run - win) / stride + 1;
}

WindowTensor make_windows(const std::array<std::vector<double>, kNumChannels>& signals,
                          const labeling::LabelStream& labels, const std::string& subject_id, std::size_t win,
                          std::size_t stride, WindowLabelMode mode) {
  if (win == 0 || stride == 0) throw Error(Errc::invalid_config, "window length and stride must be positive");
  const std::size_t n = signals[0].size();
  for (const auto& s : signals) {
    if (s.size() != n) throw Error(Errc::shape_mismatch, "channel lengths differ");
  }
  if (labels.size() != n) throw Error(Errc::shape_mismatch, "label stream length differs from signal length");
  if (n < win) throw Error(Errc::signal_too_short, "signal shorter than one window");

  WindowTensor t;
  t.window_len = win;
  t.stride = stride;
  t.group_thresholds.push_back({});

  auto emit = [&](std::size_t start) {
    for (std::size_t k = 0; k < win; ++k) {
      for (std::size_t c = 0; c < kNumChannels; ++c) t.data.push_back(signals[c][start + k]);
    }
    PhaseLabel label = labels.labels[start + win / 2];
    if (mode == WindowLabelMode::majority) {
      std::size_t swing = 0;
      for (std::size_t k = 0; k < win; ++k) swing += labels.labels[start + k] == PhaseLabel::swing;
      label = 2 * swing > win ? PhaseLabel::swing : PhaseLabel::stance;
    }
    t.labels.push_back(label);
    t.subject_ids.push_back(subject_id);
    t.group.push_back(0);
  };

  std::size_t i = 0;
  while (i < n) {
    if (!labels.valid_mask[i]) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < n && labels.valid_mask[end]) ++end;
    for (std::size_t start = i; start + win <= end; start += stride) emit(start);
    i = end;
  }
  return t;
}

std::size_t zc(std::span<const double> w, double theta) {
  return simd::kernels().zero_crossings(w.data(), w.size(), theta);
}

double zc_literal(std::span<const double> w, double theta) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const double prod = w[i] * w[i + 1];
    const double sgn = prod > 0.0 ? 1.0 : (prod < 0.0 ? -1.0 : 0.0);
    const double step = std::fabs(w[i] - w[i + 1]) - theta >= 0.0 ? 1.0 : 0.0;
    acc += sgn * step;
  }
  return 0.5 * acc;
}

double mav(std::span<const double> w) {
  if (w.empty()) return 0.0;
  return simd::kernels().sum_abs(w.data(), w.size()) / static_cast<double>(w.size());
}

double std_dev(std::span<const double> w) {
  if (w.empty()) return 0.0;
  const auto& k = simd::kernels();
  const double n = static_cast<double>(w.size());
  const double mean = k.sum(w.data(), w.size()) / n;
  return std::sqrt(k.sum_sq_dev(w.data(), w.size(), mean) / n);
}

double mad(std::span<const double> w) {
  if (w.empty()) return 0.0;
  const auto& k = simd::kernels();
  const double n = static_cast<double>(w.size());
  const double mean = k.sum(w.data(), w.size()) / n;
  return k.sum_abs_dev(w.data(), w.size(), mean) / n;
}

ZcThresholds compute_thresholds(const std::array<std::vector<double>, kNumChannels>& signals,
                                const std::vector<bool>& valid) {
  ZcThresholds th;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    const auto& x = signals[c];
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!valid.empty() && !valid[i]) continue;
      acc += std::fabs(x[i]);
      ++count;
    }
    th.theta[c] = count == 0 ? 0.0 : 0.03 * acc / static_cast<double>(count);
  }
  return th;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.X = X.select_rows(indices);
  out.feature_names = feature_names;
  for (std::size_t i : indices) {
    out.labels.push_back(labels[i]);
    out.subject_ids.push_back(subject_ids[i]);
  }
  return out;
}

std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  for (auto ch : kChannelNames) {
    for (const char* f : {"ZC", "MAV", "SD", "MAD"}) names.push_back(std::string(ch) + "_" + f);
  }
  return names;
}

namespace {

template <class ThresholdFor>
FeatureMatrix extract_impl(const WindowTensor& tensor, ZcMode mode, ThresholdFor&& threshold_for) {
  FeatureMatrix fm;
  fm.X = Matrix(tensor.size(), kNumFeatures);
  fm.feature_names = feature_names();
  fm.labels = tensor.labels;
  fm.subject_ids = tensor.subject_ids;

  const std::size_t L = tensor.window_len;
  std::vector<double> buf(L);
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    const auto w = tensor.window(i);
    const ZcThresholds& th = threshold_for(i);
    auto row = fm.X.row(i);
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      for (std::size_t k = 0; k < L; ++k) buf[k] = w[k * kNumChannels + c];
      const double z = mode == ZcMode::count ? static_cast<double>(zc(buf, th.theta[c])) : zc_literal(buf, th.theta[c]);
      row[c * kFeaturesPerChannel + 0] = z;
      row[c * kFeaturesPerChannel + 1] = mav(buf);
      row[c * kFeaturesPerChannel + 2] = std_dev(buf);
      row[c * kFeaturesPerChannel + 3] = mad(buf);
    }
  }
  return fm;
}

}  // namespace

FeatureMatrix extract_features(const WindowTensor& tensor, const ZcThresholds& thresholds, ZcMode mode) {
  return extract_impl(tensor, mode, [&](std::size_t) -> const ZcThresholds& { return thresholds; });
}

FeatureMatrix extract_features(const WindowTensor& tensor, ZcMode mode) {
  if (tensor.group.size() != tensor.size()) throw Error(Errc::shape_mismatch, "tensor has no group index");
  for (std::uint32_t g : tensor.group) {
    if (g >= tensor.group_thresholds.size()) throw Error(Errc::shape_mismatch, "group without thresholds");
  }
  return extract_impl(tensor, mode,
                      [&](std::size_t i) -> const ZcThresholds& { return tensor.group_thresholds[tensor.group[i]]; });
}

FeatureScaler fit_scaler(const Matrix& X_train) {
  if (X_train.rows() == 0) throw Error(Errc::empty_input, "cannot fit a scaler on zero rows");
  FeatureScaler s;
  const std::size_t d = X_train.cols();
  const double n = static_cast<double>(X_train.rows());
  s.means.assign(d, 0.0);
  s.stds.assign(d, 0.0);
  for (std::size_t r = 0; r < X_train.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) s.means[c] += X_train(r, c);
  }
  for (double& m : s.means) m /= n;
  for (std::size_t r = 0; r < X_train.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = X_train(r, c) - s.means[c];
      s.stds[c] += dv * dv;
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    s.stds[c] = std::sqrt(s.stds[c] / n);
    if (s.stds[c] <= 1e-12 * std::max(1.0, std::fabs(s.means[c]))) s.stds[c] = 0.0;
  }
  s.fitted = true;
  return s;
}

Matrix apply_scaler(const FeatureScaler& scaler, const Matrix& X) {
  if (!scaler.fitted) throw Error(Errc::not_fitted, "scaler used before fit");
  if (X.cols() != scaler.means.size()) throw Error(Errc::shape_mismatch, "scaler width differs from input");
  Matrix out(X.rows(), X.cols());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t c = 0; c < X.cols(); ++c) {
      out(r, c) = scaler.stds[c] > 0.0 ? (X(r, c) - scaler.means[c]) / scaler.stds[c] : 0.0;
    }
  }
  return out;
}

}  // namespace emgait::features
