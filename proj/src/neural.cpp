#include "emgait/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "emgait/error.hpp"
#include "emgait/simd/kernels.hpp"

namespace emgait::nn {
namespace {

constexpr char kMagic[4] = {'E', 'M', 'G', 'N'};
constexpr std::uint32_t kVersion = 1;

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// ---- raw kernels shared by the public primitives and the network ----

void conv_fwd(const double* in, std::size_t L, std::size_t C, const double* W, std::size_t F, std::size_t K,
              const double* b, double* out, bool relu) {
  const auto& k = simd::kernels();
  const std::size_t lo = L - K + 1, span = K * C;
  for (std::size_t t = 0; t < lo; ++t) {
    const double* x = in + t * C;
    double* o = out + t * F;
    for (std::size_t f = 0; f < F; ++f) o[f] = b[f] + k.dot(x, W + f * span, span);
  }
  if (relu) k.relu(out, lo * F);
}

// d_out is overwritten with the pre-activation gradient. d_in may be null.
void conv_bwd(const double* in, std::size_t L, std::size_t C, const double* W, std::size_t F, std::size_t K,
              const double* out, double* d_out, double* d_in, double* dW, double* db, bool relu) {
  const auto& k = simd::kernels();
  const std::size_t lo = L - K + 1, span = K * C;
  if (relu) {
    for (std::size_t i = 0; i < lo * F; ++i) {
      if (!(out[i] > 0.0)) d_out[i] = 0.0;
    }
  }
  if (d_in) std::fill(d_in, d_in + L * C, 0.0);
  for (std::size_t t = 0; t < lo; ++t) {
    const double* x = in + t * C;
    const double* g = d_out + t * F;
    for (std::size_t f = 0; f < F; ++f) {
      if (g[f] == 0.0) continue;
      db[f] += g[f];
      k.axpy(g[f], x, dW + f * span, span);
      if (d_in) k.axpy(g[f], W + f * span, d_in + t * C, span);
    }
  }
}

void pool_fwd(const double* in, std::size_t L, std::size_t F, std::size_t pool, double* out, std::size_t* arg) {
  const std::size_t lo = L / pool;
  for (std::size_t t = 0; t < lo; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      std::size_t best = t * pool * F + f;
      for (std::size_t j = 1; j < pool; ++j) {
        const std::size_t idx = (t * pool + j) * F + f;
        if (in[idx] > in[best]) best = idx;
      }
      out[t * F + f] = in[best];
      arg[t * F + f] = best;
    }
  }
}

void pool_bwd(const std::size_t* arg, const double* d_out, std::size_t n_out, double* d_in, std::size_t n_in) {
  std::fill(d_in, d_in + n_in, 0.0);
  for (std::size_t i = 0; i < n_out; ++i) d_in[arg[i]] += d_out[i];
}

void dense_fwd(const double* x, std::size_t in, const double* W, std::size_t out, const double* b, double* y,
               bool relu) {
  const auto& k = simd::kernels();
  for (std::size_t o = 0; o < out; ++o) y[o] = b[o] + k.dot(W + o * in, x, in);
  if (relu) k.relu(y, out);
}

void dense_bwd(const double* x, std::size_t in, const double* W, std::size_t out, const double* y, double* d_y,
               double* d_x, double* dW, double* db, bool relu) {
  const auto& k = simd::kernels();
  if (d_x) std::fill(d_x, d_x + in, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    if (relu && !(y[o] > 0.0)) d_y[o] = 0.0;
    const double g = d_y[o];
    if (g == 0.0) continue;
    db[o] += g;
    k.axpy(g, x, dW + o * in, in);
    if (d_x) k.axpy(g, W + o * in, d_x, in);
  }
}

void xent(const double* logits, std::size_t n, int label, double& loss, double* grad) {
  const auto lab = static_cast<std::size_t>(label);
  const double mx = *std::max_element(logits, logits + n);
  double rest = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != lab) rest += std::exp(logits[i] - mx);
  }
  const double own = std::exp(logits[lab] - mx);
  loss = logits[lab] == mx ? std::log1p(rest) : (mx - logits[lab]) + std::log(own + rest);
  const double s = own + rest;
  double others = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == lab) continue;
    grad[i] = std::exp(logits[i] - mx) / s;
    others += grad[i];
  }
  grad[lab] = -others;
}

struct Dims {
  std::size_t L, C, F1, K1, F2, K2, P, l1, p1, l2, p2, flat, D1, D2, O;

  explicit Dims(const DcnnModel& m)
      : L(static_cast<std::size_t>(m.config.input_len)),
        C(static_cast<std::size_t>(m.config.input_channels)),
        F1(static_cast<std::size_t>(m.config.conv1.filters)),
        K1(static_cast<std::size_t>(m.config.conv1.kernel)),
        F2(static_cast<std::size_t>(m.config.conv2.filters)),
        K2(static_cast<std::size_t>(m.config.conv2.kernel)),
        P(static_cast<std::size_t>(m.config.pool_size)),
        l1(m.layout.conv1_len),
        p1(m.layout.pool1_len),
        l2(m.layout.conv2_len),
        p2(m.layout.pool2_len),
        flat(m.layout.flat),
        D1(static_cast<std::size_t>(m.config.dense1_units)),
        D2(static_cast<std::size_t>(m.config.dense2_units)),
        O(static_cast<std::size_t>(m.config.output_units)) {}
};

struct Workspace {
  std::vector<double> c1, p1, c2, p2, h1, m1, h2, m2, logits;
  std::vector<std::size_t> a1, a2;
  std::vector<double> g_c1, g_p1, g_c2, g_p2, g_h1, g_h2, g_logits;

  explicit Workspace(const Dims& d)
      : c1(d.l1 * d.F1), p1(d.p1 * d.F1), c2(d.l2 * d.F2), p2(d.flat), h1(d.D1), m1(d.D1, 1.0), h2(d.D2),
        m2(d.D2, 1.0), logits(d.O), a1(d.p1 * d.F1), a2(d.flat), g_c1(d.l1 * d.F1), g_p1(d.p1 * d.F1),
        g_c2(d.l2 * d.F2), g_p2(d.flat), g_h1(d.D1), g_h2(d.D2), g_logits(d.O) {}
};

void apply_dropout(std::vector<double>& h, std::vector<double>& mask, double rate, Rng* rng) {
  if (!rng || rate == 0.0) {
    std::fill(mask.begin(), mask.end(), 1.0);
    return;
  }
  const double keep = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < h.size(); ++i) {
    mask[i] = uniform01(*rng) < rate ? 0.0 : keep;
    h[i] *= mask[i];
  }
}

void forward_ws(const DcnnModel& m, const Dims& d, const double* x, Workspace& ws, Rng* dropout_rng) {
  const double* p = m.params.data();
  const ParamLayout& lay = m.layout;
  conv_fwd(x, d.L, d.C, p + lay.conv1_w.offset, d.F1, d.K1, p + lay.conv1_b.offset, ws.c1.data(), true);
  pool_fwd(ws.c1.data(), d.l1, d.F1, d.P, ws.p1.data(), ws.a1.data());
  conv_fwd(ws.p1.data(), d.p1, d.F1, p + lay.conv2_w.offset, d.F2, d.K2, p + lay.conv2_b.offset, ws.c2.data(), true);
  pool_fwd(ws.c2.data(), d.l2, d.F2, d.P, ws.p2.data(), ws.a2.data());
  dense_fwd(ws.p2.data(), d.flat, p + lay.dense1_w.offset, d.D1, p + lay.dense1_b.offset, ws.h1.data(), true);
  apply_dropout(ws.h1, ws.m1, m.config.dropout_rate, dropout_rng);
  dense_fwd(ws.h1.data(), d.D1, p + lay.dense2_w.offset, d.D2, p + lay.dense2_b.offset, ws.h2.data(), true);
  apply_dropout(ws.h2, ws.m2, m.config.dropout_rate, dropout_rng);
  dense_fwd(ws.h2.data(), d.D2, p + lay.out_w.offset, d.O, p + lay.out_b.offset, ws.logits.data(), false);
}

// Accumulates scale * d(loss)/d(params) into g. ws.g_logits must hold d(loss)/d(logits).
void backward_ws(const DcnnModel& m, const Dims& d, const double* x, Workspace& ws, double* g) {
  const double* p = m.params.data();
  const ParamLayout& lay = m.layout;
  dense_bwd(ws.h2.data(), d.D2, p + lay.out_w.offset, d.O, ws.logits.data(), ws.g_logits.data(), ws.g_h2.data(),
            g + lay.out_w.offset, g + lay.out_b.offset, false);
  // dropout on h2: h2 stored post-mask; gradient w.r.t. the pre-mask ReLU output
  for (std::size_t i = 0; i < d.D2; ++i) ws.g_h2[i] *= ws.m2[i];
  dense_bwd(ws.h1.data(), d.D1, p + lay.dense2_w.offset, d.D2, ws.h2.data(), ws.g_h2.data(), ws.g_h1.data(),
            g + lay.dense2_w.offset, g + lay.dense2_b.offset, true);
  for (std::size_t i = 0; i < d.D1; ++i) ws.g_h1[i] *= ws.m1[i];
  dense_bwd(ws.p2.data(), d.flat, p + lay.dense1_w.offset, d.D1, ws.h1.data(), ws.g_h1.data(), ws.g_p2.data(),
            g + lay.dense1_w.offset, g + lay.dense1_b.offset, true);
  pool_bwd(ws.a2.data(), ws.g_p2.data(), d.flat, ws.g_c2.data(), ws.g_c2.size());
  conv_bwd(ws.p1.data(), d.p1, d.F1, p + lay.conv2_w.offset, d.F2, d.K2, ws.c2.data(), ws.g_c2.data(),
           ws.g_p1.data(), g + lay.conv2_w.offset, g + lay.conv2_b.offset, true);
  pool_bwd(ws.a1.data(), ws.g_p1.data(), ws.g_p1.size(), ws.g_c1.data(), ws.g_c1.size());
  conv_bwd(x, d.L, d.C, p + lay.conv1_w.offset, d.F1, d.K1, ws.c1.data(), ws.g_c1.data(), nullptr,
           g + lay.conv1_w.offset, g + lay.conv1_b.offset, true);
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double loss_grad_impl(const DcnnModel& model, std::span<const double> windows, std::span<const int> labels,
                      std::vector<double>& grad, Rng* dropout_rng, int* n_correct) {
  const Dims d(model);
  const std::size_t wv = d.L * d.C;
  if (labels.empty() || windows.size() != labels.size() * wv) {
    throw Error(Errc::shape_mismatch, "batch windows and labels disagree");
  }
  if (!std::all_of(windows.begin(), windows.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(Errc::non_finite_gradient, "non-finite value in input windows");
  }
  grad.assign(model.params.size(), 0.0);
  Workspace ws(d);
  const double scale = 1.0 / static_cast<double>(labels.size());
  double total = 0.0;
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* x = windows.data() + i * wv;
    forward_ws(model, d, x, ws, dropout_rng);
    double loss = 0.0;
    xent(ws.logits.data(), d.O, labels[i], loss, ws.g_logits.data());
    correct += argmax(ws.logits) == labels[i];
    total += loss;
    for (double& v : ws.g_logits) v *= scale;
    backward_ws(model, d, x, ws, grad.data());
  }
  if (!std::isfinite(total)) throw Error(Errc::non_finite_gradient, "non-finite loss");
  for (double v : grad) {
    if (!std::isfinite(v)) throw Error(Errc::non_finite_gradient, "non-finite gradient");
  }
  if (n_correct) *n_correct = correct;
  return total * scale;
}

}  // namespace

// ---- config ----

void validate(const DcnnConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(Errc::invalid_config, msg); };
  if (c.input_len < 1 || c.input_channels < 1) fail("input shape must be positive");
  if (c.conv1.filters < 1 || c.conv1.kernel < 1 || c.conv2.filters < 1 || c.conv2.kernel < 1) {
    fail("convolution filters and kernels must be >= 1");
  }
  if (c.pool_size < 1) fail("pool_size must be >= 1");
  if (c.dense1_units < 1 || c.dense2_units < 1) fail("dense units must be >= 1");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
  if (c.output_units != 2) fail("output_units must be 2");
  if (!(c.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (c.batch_size < 1) fail("batch_size must be >= 1");
  if (c.max_epochs < 1) fail("max_epochs must be >= 1");
  if (c.patience < 1) fail("patience must be >= 1");
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) fail("val_fraction must lie in (0, 1)");
  layout_for(c);
}

nlohmann::json to_json(const DcnnConfig& c) {
  return {{"input_len", c.input_len},
          {"input_channels", c.input_channels},
          {"conv1", {{"filters", c.conv1.filters}, {"kernel", c.conv1.kernel}}},
          {"conv2", {{"filters", c.conv2.filters}, {"kernel", c.conv2.kernel}}},
          {"pool_size", c.pool_size},
          {"dense1_units", c.dense1_units},
          {"dense2_units", c.dense2_units},
          {"dropout_rate", c.dropout_rate},
          {"output_units", c.output_units},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"seed", c.seed},
          {"selection", c.selection == Selection::test_accuracy ? "test_accuracy" : "val_accuracy"},
          {"val_fraction", c.val_fraction}};
}

DcnnConfig config_from_json(const nlohmann::json& j) {
  DcnnConfig c;
  try {
    c.input_len = j.value("input_len", c.input_len);
    c.input_channels = j.value("input_channels", c.input_channels);
    if (j.contains("conv1")) c.conv1 = {j["conv1"].at("filters").get<int>(), j["conv1"].at("kernel").get<int>()};
    if (j.contains("conv2")) c.conv2 = {j["conv2"].at("filters").get<int>(), j["conv2"].at("kernel").get<int>()};
    c.pool_size = j.value("pool_size", c.pool_size);
    c.dense1_units = j.value("dense1_units", c.dense1_units);
    c.dense2_units = j.value("dense2_units", c.dense2_units);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.output_units = j.value("output_units", c.output_units);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    const std::string sel = j.value("selection", std::string("test_accuracy"));
    if (sel == "test_accuracy") {
      c.selection = Selection::test_accuracy;
    } else if (sel == "val_accuracy") {
      c.selection = Selection::val_accuracy;
    } else {
      throw Error(Errc::invalid_config, "selection must be test_accuracy or val_accuracy");
    }
    c.val_fraction = j.value("val_fraction", c.val_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, std::string("dcnn config: ") + e.what());
  }
  validate(c);
  return c;
}

std::vector<TensorSlot> ParamLayout::tensors() const {
  return {conv1_w, conv1_b, conv2_w, conv2_b, dense1_w, dense1_b, dense2_w, dense2_b, out_w, out_b};
}

ParamLayout layout_for(const DcnnConfig& c) {
  ParamLayout l;
  const auto L = static_cast<std::size_t>(c.input_len), C = static_cast<std::size_t>(c.input_channels);
  const auto K1 = static_cast<std::size_t>(c.conv1.kernel), K2 = static_cast<std::size_t>(c.conv2.kernel);
  const auto F1 = static_cast<std::size_t>(c.conv1.filters), F2 = static_cast<std::size_t>(c.conv2.filters);
  const auto P = static_cast<std::size_t>(c.pool_size);
  if (L < K1) throw Error(Errc::shape_mismatch, "input shorter than conv1 kernel");
  l.conv1_len = L - K1 + 1;
  l.pool1_len = l.conv1_len / P;
  if (l.pool1_len < K2) throw Error(Errc::shape_mismatch, "pooled conv1 output shorter than conv2 kernel");
  l.conv2_len = l.pool1_len - K2 + 1;
  l.pool2_len = l.conv2_len / P;
  if (l.pool2_len < 1) throw Error(Errc::shape_mismatch, "conv2 output shorter than pool size");
  l.flat = l.pool2_len * F2;
  const auto D1 = static_cast<std::size_t>(c.dense1_units), D2 = static_cast<std::size_t>(c.dense2_units);
  const auto O = static_cast<std::size_t>(c.output_units);
  std::size_t off = 0;
  auto slot = [&](const char* name, std::size_t n) {
    TensorSlot s{name, off, n};
    off += n;
    return s;
  };
  l.conv1_w = slot("conv1.weight", F1 * K1 * C);
  l.conv1_b = slot("conv1.bias", F1);
  l.conv2_w = slot("conv2.weight", F2 * K2 * F1);
  l.conv2_b = slot("conv2.bias", F2);
  l.dense1_w = slot("dense1.weight", D1 * l.flat);
  l.dense1_b = slot("dense1.bias", D1);
  l.dense2_w = slot("dense2.weight", D2 * D1);
  l.dense2_b = slot("dense2.bias", D2);
  l.out_w = slot("output.weight", O * D2);
  l.out_b = slot("output.bias", O);
  l.total = off;
  return l;
}

DcnnModel init_model(const DcnnConfig& cfg) {
  validate(cfg);
  DcnnModel m;
  m.config = cfg;
  m.layout = layout_for(cfg);
  m.params.assign(m.layout.total, 0.0);
  Rng rng(derive_seed(cfg.seed, stream::dcnn));
  auto fill = [&](const TensorSlot& s, double limit) {
    for (double& w : m.tensor(s)) w = (2.0 * uniform01(rng) - 1.0) * limit;
  };
  const double C = cfg.input_channels, F1 = cfg.conv1.filters;
  fill(m.layout.conv1_w, std::sqrt(6.0 / (cfg.conv1.kernel * C)));
  fill(m.layout.conv2_w, std::sqrt(6.0 / (cfg.conv2.kernel * F1)));
  fill(m.layout.dense1_w, std::sqrt(6.0 / static_cast<double>(m.layout.flat)));
  fill(m.layout.dense2_w, std::sqrt(6.0 / cfg.dense1_units));
  fill(m.layout.out_w, std::sqrt(6.0 / (cfg.dense2_units + cfg.output_units)));
  return m;
}

// ---- primitives ----

Matrix conv1d_forward(const Matrix& input, const Matrix& weights, std::span<const double> bias, int kernel,
                      bool relu) {
  const std::size_t C = input.cols(), L = input.rows(), F = weights.rows();
  const auto K = static_cast<std::size_t>(kernel);
  if (kernel < 1 || L < K || weights.cols() != K * C || bias.size() != F) {
    throw Error(Errc::shape_mismatch, "conv1d shapes do not conform");
  }
  Matrix out(L - K + 1, F);
  conv_fwd(input.data().data(), L, C, weights.data().data(), F, K, bias.data(), out.data().data(), relu);
  return out;
}

ConvGrads conv1d_backward(const Matrix& input, const Matrix& weights, int kernel, const Matrix& output,
                          const Matrix& d_output, bool relu) {
  const std::size_t C = input.cols(), L = input.rows(), F = weights.rows();
  const auto K = static_cast<std::size_t>(kernel);
  if (kernel < 1 || L < K || weights.cols() != K * C || output.rows() != L - K + 1 || output.cols() != F ||
      d_output.rows() != output.rows() || d_output.cols() != F) {
    throw Error(Errc::shape_mismatch, "conv1d backward shapes do not conform");
  }
  ConvGrads g{Matrix(L, C), Matrix(F, K * C), std::vector<double>(F, 0.0)};
  std::vector<double> dpre = d_output.data();
  conv_bwd(input.data().data(), L, C, weights.data().data(), F, K, output.data().data(), dpre.data(),
           g.d_input.data().data(), g.d_weights.data().data(), g.d_bias.data(), relu);
  return g;
}

PoolResult maxpool1d(const Matrix& input, int pool) {
  if (pool < 1 || input.rows() < static_cast<std::size_t>(pool)) {
    throw Error(Errc::shape_mismatch, "maxpool input shorter than pool");
  }
  const std::size_t lo = input.rows() / static_cast<std::size_t>(pool);
  PoolResult r{Matrix(lo, input.cols()), std::vector<std::size_t>(lo * input.cols())};
  pool_fwd(input.data().data(), input.rows(), input.cols(), static_cast<std::size_t>(pool), r.output.data().data(),
           r.argmax.data());
  return r;
}

Matrix maxpool1d_backward(const PoolResult& fwd, std::size_t in_rows, std::size_t in_cols, const Matrix& d_output) {
  if (d_output.rows() != fwd.output.rows() || d_output.cols() != fwd.output.cols()) {
    throw Error(Errc::shape_mismatch, "maxpool backward shapes do not conform");
  }
  Matrix d_in(in_rows, in_cols);
  pool_bwd(fwd.argmax.data(), d_output.data().data(), fwd.argmax.size(), d_in.data().data(), in_rows * in_cols);
  return d_in;
}

std::vector<double> dense_forward(std::span<const double> x, const Matrix& W, std::span<const double> b,
                                  bool relu) {
  if (W.cols() != x.size() || W.rows() != b.size()) throw Error(Errc::shape_mismatch, "dense shapes do not conform");
  std::vector<double> y(W.rows());
  dense_fwd(x.data(), x.size(), W.data().data(), W.rows(), b.data(), y.data(), relu);
  return y;
}

DenseGrads dense_backward(std::span<const double> x, const Matrix& W, std::span<const double> y,
                          std::span<const double> d_y, bool relu) {
  if (W.cols() != x.size() || W.rows() != y.size() || d_y.size() != y.size()) {
    throw Error(Errc::shape_mismatch, "dense backward shapes do not conform");
  }
  DenseGrads g{std::vector<double>(x.size()), Matrix(W.rows(), W.cols()), std::vector<double>(W.rows(), 0.0)};
  std::vector<double> dy(d_y.begin(), d_y.end());
  dense_bwd(x.data(), x.size(), W.data().data(), W.rows(), y.data(), dy.data(), g.d_x.data(), g.d_W.data().data(),
            g.d_b.data(), relu);
  return g;
}

DropoutResult dropout(std::span<const double> x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(Errc::invalid_config, "dropout rate must lie in [0, 1)");
  DropoutResult r{std::vector<double>(x.begin(), x.end()), std::vector<double>(x.size(), 1.0)};
  apply_dropout(r.output, r.mask, rate, training ? &rng : nullptr);
  return r;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] = std::exp(logits[i] - mx));
  for (double& v : p) v /= s;
  return p;
}

XentResult softmax_xent(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw Error(Errc::shape_mismatch, "label outside logits");
  }
  XentResult r{0.0, std::vector<double>(logits.size())};
  xent(logits.data(), logits.size(), label, r.loss, r.grad.data());
  return r;
}

// ---- network ----

std::vector<double> forward(const DcnnModel& model, std::span<const double> window) {
  const Dims d(model);
  if (window.size() != d.L * d.C) throw Error(Errc::shape_mismatch, "window size differs from network input");
  Workspace ws(d);
  forward_ws(model, d, window.data(), ws, nullptr);
  return ws.logits;
}

double loss_and_grad(const DcnnModel& model, std::span<const double> windows, std::span<const int> labels,
                     std::vector<double>& grad, Rng* dropout_rng) {
  return loss_grad_impl(model, windows, labels, grad, dropout_rng, nullptr);
}

double batch_loss(const DcnnModel& model, std::span<const double> windows, std::span<const int> labels) {
  const Dims d(model);
  const std::size_t wv = d.L * d.C;
  if (labels.empty() || windows.size() != labels.size() * wv) {
    throw Error(Errc::shape_mismatch, "batch windows and labels disagree");
  }
  Workspace ws(d);
  double total = 0.0, loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    forward_ws(model, d, windows.data() + i * wv, ws, nullptr);
    xent(ws.logits.data(), d.O, labels[i], loss, ws.g_logits.data());
    total += loss;
  }
  return total / static_cast<double>(labels.size());
}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& s, double lr) {
  if (grads.size() != params.size()) throw Error(Errc::shape_mismatch, "gradient size differs from parameters");
  for (double g : grads) {
    if (!std::isfinite(g)) throw Error(Errc::non_finite_gradient, "non-finite gradient");
  }
  if (s.m.size() != params.size()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
    s.t = 0;
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
    const double mh = s.m[i] / c1, vh = s.v[i] / c2;
    params[i] -= lr * mh / (std::sqrt(vh) + s.eps);
  }
}

namespace {

void check_input(const DcnnModel& model, const features::WindowTensor& w) {
  if (w.window_values() != static_cast<std::size_t>(model.config.input_len * model.config.input_channels)) {
    throw Error(Errc::shape_mismatch, "window shape differs from network input");
  }
}

}  // namespace

Labels predict_dcnn(const DcnnModel& model, const features::WindowTensor& windows) {
  check_input(model, windows);
  const Dims d(model);
  Workspace ws(d);
  Labels out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    forward_ws(model, d, windows.window(i).data(), ws, nullptr);
    out[i] = argmax(ws.logits);
  }
  return out;
}

EvalResult evaluate_dcnn(const DcnnModel& model, const features::WindowTensor& windows) {
  check_input(model, windows);
  EvalResult r;
  if (windows.size() == 0) return r;
  const Dims d(model);
  Workspace ws(d);
  double total = 0.0, loss = 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const int y = static_cast<int>(windows.labels[i]);
    forward_ws(model, d, windows.window(i).data(), ws, nullptr);
    xent(ws.logits.data(), d.O, y, loss, ws.g_logits.data());
    total += loss;
    hit += argmax(ws.logits) == y;
  }
  r.loss = total / static_cast<double>(windows.size());
  r.accuracy = static_cast<double>(hit) / static_cast<double>(windows.size());
  return r;
}

nlohmann::json to_json(const TrainHistory& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    epochs.push_back({{"train_loss", e.train_loss},
                      {"train_acc", e.train_acc},
                      {"val_loss", e.val_loss},
                      {"val_acc", e.val_acc},
                      {"test_loss", e.test_loss},
                      {"test_acc", e.test_acc}});
  }
  return {{"epochs", epochs},
          {"best_epoch", h.best_epoch},
          {"best_val_epoch", h.best_val_epoch},
          {"stopped_epoch", h.stopped_epoch},
          {"selection", h.selection == Selection::test_accuracy ? "test_accuracy" : "val_accuracy"}};
}

TrainResult train_dcnn(const DcnnModel& initial, const features::WindowTensor& train,
                       const features::WindowTensor& val, const features::WindowTensor& test, std::uint64_t seed) {
  const DcnnConfig& cfg = initial.config;
  validate(cfg);
  if (train.size() == 0) throw Error(Errc::empty_split, "training split is empty");
  if (val.size() == 0) throw Error(Errc::empty_split, "validation split is empty");
  if (cfg.selection == Selection::test_accuracy && test.size() == 0) {
    throw Error(Errc::empty_split, "test split is empty");
  }
  check_input(initial, train);
  check_input(initial, val);
  check_input(initial, test);

  TrainResult res{initial, {}};
  res.history.selection = cfg.selection;
  DcnnModel& model = res.model;
  model.training = true;
  std::vector<double> best_params = model.params;
  double best_sel = -1.0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int since_improve = 0;

  Rng rng(derive_seed(seed, stream::dcnn));
  AdamState adam;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t wv = train.window_values();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<double> batch, grad;
  std::vector<int> batch_labels;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t n = std::min(bs, order.size() - start);
      batch.resize(n * wv);
      batch_labels.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto w = train.window(order[start + i]);
        std::copy(w.begin(), w.end(), batch.begin() + static_cast<std::ptrdiff_t>(i * wv));
        batch_labels[i] = static_cast<int>(train.labels[order[start + i]]);
      }
      int hit = 0;
      const double loss = loss_grad_impl(model, batch, batch_labels, grad, &rng, &hit);
      loss_sum += loss * static_cast<double>(n);
      correct += static_cast<std::size_t>(hit);
      adam_step(model.params, grad, adam, cfg.learning_rate);
    }
    model.training = false;
    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
    const EvalResult v = evaluate_dcnn(model, val);
    const EvalResult t = evaluate_dcnn(model, test);
    rec.val_loss = v.loss;
    rec.val_acc = v.accuracy;
    rec.test_loss = t.loss;
    rec.test_acc = t.accuracy;
    model.training = true;
    res.history.epochs.push_back(rec);
    res.history.stopped_epoch = epoch;

    const double sel = cfg.selection == Selection::test_accuracy ? rec.test_acc : rec.val_acc;
    if (sel > best_sel) {
      best_sel = sel;
      best_params = model.params;
      res.history.best_epoch = epoch;
    }
    if (rec.val_loss < best_val_loss) {
      best_val_loss = rec.val_loss;
      res.history.best_val_epoch = epoch;
      since_improve = 0;
    } else if (++since_improve >= cfg.patience) {
      break;
    }
  }
  model.params = std::move(best_params);
  model.training = false;
  return res;
}

// ---- container ----

namespace {

template <class T>
void put(Blob& b, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <class T>
T get(std::span<const std::uint8_t> b, std::size_t& pos) {
  if (pos + sizeof(T) > b.size()) throw Error(Errc::corrupt_blob, "blob truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[pos + i]) << (8 * i);
  pos += sizeof(T);
  return v;
}

}  // namespace

Blob serialize(const DcnnModel& model) {
  Blob b(kMagic, kMagic + 4);
  put<std::uint32_t>(b, kVersion);
  const std::string cfg = to_json(model.config).dump();
  put<std::uint32_t>(b, static_cast<std::uint32_t>(cfg.size()));
  b.insert(b.end(), cfg.begin(), cfg.end());
  put<std::uint64_t>(b, model.params.size());
  for (double v : model.params) put<std::uint64_t>(b, std::bit_cast<std::uint64_t>(v));
  return b;
}

DcnnModel deserialize(std::span<const std::uint8_t> b) {
  if (b.size() < 4 || !std::equal(kMagic, kMagic + 4, b.begin())) throw Error(Errc::corrupt_blob, "bad magic");
  std::size_t pos = 4;
  if (get<std::uint32_t>(b, pos) != kVersion) throw Error(Errc::corrupt_blob, "unsupported version");
  const auto len = get<std::uint32_t>(b, pos);
  if (pos + len > b.size()) throw Error(Errc::corrupt_blob, "blob truncated");
  DcnnModel m;
  try {
    m.config = config_from_json(nlohmann::json::parse(b.begin() + static_cast<std::ptrdiff_t>(pos),
                                                      b.begin() + static_cast<std::ptrdiff_t>(pos + len)));
  } catch (const std::exception& e) {
    throw Error(Errc::corrupt_blob, std::string("blob config: ") + e.what());
  }
  pos += len;
  m.layout = layout_for(m.config);
  const auto n = get<std::uint64_t>(b, pos);
  if (n != m.layout.total) throw Error(Errc::corrupt_blob, "parameter count differs from architecture");
  if (b.size() - pos != n * 8) throw Error(Errc::corrupt_blob, "payload size mismatch");
  m.params.resize(n);
  for (auto& v : m.params) {
    v = std::bit_cast<double>(get<std::uint64_t>(b, pos));
    if (!std::isfinite(v)) throw Error(Errc::corrupt_blob, "non-finite parameter");
  }
  return m;
}

Blob save_initial_weights(const DcnnConfig& cfg) { return serialize(init_model(cfg)); }

std::string blob_hash(std::span<const std::uint8_t> blob) { return hex_digest(fnv1a64(blob.data(), blob.size())); }

void write_blob(const Blob& blob, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!f) throw Error(Errc::io_error, "write failed: " + path);
}

Blob read_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_error, "cannot open " + path);
  return Blob(std::istreambuf_iterator<char>(f), {});
}

}  // namespace emgait::nn
