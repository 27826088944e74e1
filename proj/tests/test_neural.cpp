#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "emgait/error.hpp"
#include "emgait/neural.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace emgait;
using namespace emgait::nn;

namespace {

features::WindowTensor separable_windows(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  features::WindowTensor t;
  const std::size_t L = features::kWindowLen;
  for (std::size_t i = 0; i < n; ++i) {
    const bool swing = (rng() & 1U) != 0;
    for (std::size_t s = 0; s < L; ++s) {
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        const double burst = (swing == (c < 2)) ? 2.0 * std::sin(0.9 * static_cast<double>(s) + c) : 0.0;
        t.data.push_back(0.4 * g(rng) + burst);
      }
    }
    t.labels.push_back(swing ? labeling::PhaseLabel::swing : labeling::PhaseLabel::stance);
    t.subject_ids.push_back("s" + std::to_string(i % 4));
    t.group.push_back(0);
  }
  return t;
}

DcnnConfig quick_config() {
  DcnnConfig c;
  c.max_epochs = 15;
  c.patience = 15;
  c.batch_size = 32;
  c.seed = 9;
  return c;
}

}  // namespace

TEST_CASE("layout of the default network") {
  const auto lay = layout_for(DcnnConfig{});
  CHECK(lay.conv1_len == 36);
  CHECK(lay.pool1_len == 18);
  CHECK(lay.conv2_len == 16);
  CHECK(lay.pool2_len == 8);
  CHECK(lay.flat == 512);
  const std::size_t expected = 32 * 5 * 5 + 32 + 64 * 3 * 32 + 64 + 100 * 512 + 100 + 50 * 100 + 50 + 2 * 50 + 2;
  CHECK(lay.total == expected);
  std::size_t sum = 0;
  for (const auto& s : lay.tensors()) {
    CHECK(s.offset == sum);
    sum += s.size;
  }
  CHECK(sum == lay.total);
  DcnnConfig tiny;
  tiny.input_len = 6;
  CHECK_THROWS_AS(layout_for(tiny), Error);
}

TEST_CASE("config validation and JSON round trip") {
  DcnnConfig c = quick_config();
  c.selection = Selection::val_accuracy;
  c.dropout_rate = 0.25;
  CHECK(config_from_json(nlohmann::json::parse(to_json(c).dump())) == c);
  DcnnConfig bad;
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(validate(bad), Error);
  bad = DcnnConfig{};
  bad.output_units = 3;
  CHECK_THROWS_AS(validate(bad), Error);
}

TEST_CASE("initialisation ranges") {
  const auto m = init_model(DcnnConfig{});
  const auto lay = m.layout;
  auto within = [&](const TensorSlot& s, double limit) {
    const auto t = m.tensor(s);
    return std::all_of(t.begin(), t.end(), [&](double v) { return std::abs(v) <= limit; });
  };
  CHECK(within(lay.conv1_w, std::sqrt(6.0 / 25)));
  CHECK(within(lay.conv2_w, std::sqrt(6.0 / 96)));
  CHECK(within(lay.dense1_w, std::sqrt(6.0 / 512)));
  CHECK(within(lay.out_w, std::sqrt(6.0 / 52)));
  for (const auto* b : {&lay.conv1_b, &lay.conv2_b, &lay.dense1_b, &lay.dense2_b, &lay.out_b}) CHECK(within(*b, 0.0));
  CHECK(init_model(DcnnConfig{}).params == m.params);
  DcnnConfig other;
  other.seed = 1;
  CHECK(init_model(other).params != m.params);
}

TEST_CASE("conv1d matches the triple-loop oracle") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const std::size_t L = 12, C = 3, F = 4, K = 5;
  Matrix in(L, C), w(F, K * C);
  std::vector<double> b(F);
  for (auto& v : in.data()) v = g(rng);
  for (auto& v : w.data()) v = g(rng);
  for (auto& v : b) v = g(rng);
  oracle::Mat in_rows(L, std::vector<double>(C));
  for (std::size_t t = 0; t < L; ++t)
    for (std::size_t c = 0; c < C; ++c) in_rows[t][c] = in(t, c);
  std::vector<oracle::Mat> wo(F, oracle::Mat(K, std::vector<double>(C)));
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t c = 0; c < C; ++c) wo[f][k][c] = w(f, k * C + c);
  const auto expect = oracle::conv1d(in_rows, wo, b);
  const auto got = conv1d_forward(in, w, b, static_cast<int>(K), false);
  const auto got_relu = conv1d_forward(in, w, b, static_cast<int>(K), true);
  REQUIRE(got.rows() == L - K + 1);
  REQUIRE(got.cols() == F);
  for (std::size_t t = 0; t < got.rows(); ++t)
    for (std::size_t f = 0; f < F; ++f) {
      CHECK(std::abs(got(t, f) - expect[t][f]) < 1e-12);
      CHECK(got_relu(t, f) == std::max(0.0, got(t, f)));
    }

  Matrix ident(C, 1 * C);
  for (std::size_t c = 0; c < C; ++c) ident(c, c) = 1.0;
  const std::vector<double> zb(C, 0.0);
  CHECK(conv1d_forward(in, ident, zb, 1, false).data() == in.data());
  const Matrix zero(F, K * C);
  const auto z = conv1d_forward(in, zero, b, static_cast<int>(K), false);
  for (std::size_t t = 0; t < z.rows(); ++t)
    for (std::size_t f = 0; f < F; ++f) CHECK(z(t, f) == b[f]);
}

TEST_CASE("conv1d backward agrees with finite differences") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix in(9, 2), w(3, 3 * 2), d_out(7, 3);
  std::vector<double> b(3);
  for (auto& v : in.data()) v = g(rng);
  for (auto& v : w.data()) v = g(rng);
  for (auto& v : d_out.data()) v = g(rng);
  for (auto& v : b) v = g(rng);
  auto objective = [&](const Matrix& x, const Matrix& ww) {
    const auto y = conv1d_forward(x, ww, b, 3, false);
    double s = 0;
    for (std::size_t i = 0; i < y.data().size(); ++i) s += y.data()[i] * d_out.data()[i];
    return s;
  };
  const auto out = conv1d_forward(in, w, b, 3, false);
  const auto grads = conv1d_backward(in, w, 3, out, d_out, false);
  const double h = 1e-6;
  for (std::size_t i = 0; i < in.data().size(); ++i) {
    Matrix p = in, m = in;
    p.data()[i] += h;
    m.data()[i] -= h;
    CHECK(grads.d_input.data()[i] == doctest::Approx((objective(p, w) - objective(m, w)) / (2 * h)).epsilon(1e-6));
  }
  for (std::size_t i = 0; i < w.data().size(); ++i) {
    Matrix p = w, m = w;
    p.data()[i] += h;
    m.data()[i] -= h;
    CHECK(grads.d_weights.data()[i] == doctest::Approx((objective(in, p) - objective(in, m)) / (2 * h)).epsilon(1e-6));
  }
  for (std::size_t f = 0; f < 3; ++f) {
    double s = 0;
    for (std::size_t t = 0; t < 7; ++t) s += d_out(t, f);
    CHECK(grads.d_bias[f] == doctest::Approx(s));
  }
}

TEST_CASE("max pooling") {
  const Matrix in(4, 1, {1, 3, 2, 8});
  const auto r = maxpool1d(in, 2);
  CHECK(r.output.data() == std::vector<double>{3, 8});
  CHECK(r.argmax == std::vector<std::size_t>{1, 3});
  const Matrix odd(5, 1, {5, 5, 1, 0, 9});
  const auto o = maxpool1d(odd, 2);
  CHECK(o.output.rows() == 2);
  CHECK(o.argmax[0] == 0);
  const auto back = maxpool1d_backward(r, 4, 1, Matrix(2, 1, {0.5, -1.0}));
  CHECK(back.data() == std::vector<double>{0, 0.5, 0, -1.0});
}

TEST_CASE("dense layer forward and backward") {
  const Matrix W(2, 3, {1, 2, 3, -1, 0, 1});
  const std::vector<double> x{1, 1, -2}, b{0.5, 0.0};
  const auto y = dense_forward(x, W, b, false);
  CHECK(y == std::vector<double>{-2.5, -3.0});
  CHECK(dense_forward(x, W, b, true) == std::vector<double>{0.0, 0.0});
  const std::vector<double> dy{1.0, 2.0};
  const auto g = dense_backward(x, W, y, dy, false);
  CHECK(g.d_x == std::vector<double>{-1, 2, 5});
  CHECK(g.d_b == dy);
  CHECK(g.d_W.data() == std::vector<double>{1, 1, -2, 2, 2, -4});
}

TEST_CASE("dropout statistics") {
  Rng rng(5);
  const std::vector<double> ones(100000, 1.0);
  const auto r = dropout(ones, 0.3, true, rng);
  const auto zeros = std::count(r.mask.begin(), r.mask.end(), 0.0);
  CHECK(static_cast<double>(zeros) / ones.size() == doctest::Approx(0.3).epsilon(0.02));
  double mean = 0;
  for (double v : r.output) mean += v;
  CHECK(mean / ones.size() == doctest::Approx(1.0).epsilon(0.02));
  for (double m : r.mask) CHECK((m == 0.0 || m == doctest::Approx(1.0 / 0.7)));
  const auto eval = dropout(ones, 0.3, false, rng);
  CHECK(eval.output == ones);
  CHECK_THROWS_AS(dropout(ones, 1.0, true, rng), Error);
}

TEST_CASE("softmax and cross-entropy") {
  const std::vector<double> z{1.0, 2.0};
  const auto p = softmax(z);
  CHECK(p[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  const std::vector<double> big{1000.0, 0.0};
  const auto pb = softmax(big);
  CHECK(pb[0] == 1.0);
  CHECK(std::isfinite(pb[1]));
  const auto x = softmax_xent(z, 0);
  CHECK(x.loss == doctest::Approx(std::log(1.0 + std::exp(1.0))));
  CHECK(x.grad[0] == doctest::Approx(p[0] - 1.0));
  CHECK(x.grad[1] == doctest::Approx(p[1]));
  const auto u = softmax_xent(std::vector<double>{0.0, 0.0}, 1);
  CHECK(u.loss == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(softmax_xent(z, 2), Error);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> l{g(rng), g(rng)};
    const int label = trial % 2;
    const auto r = softmax_xent(l, label);
    for (std::size_t i = 0; i < 2; ++i) CHECK(gradcheck::rel_error(r.grad[i], gradcheck::xent_numeric(l, label, i)) < 1e-8);
  }
}

TEST_CASE("full gradient check on a small network") {
  auto cfg = gradcheck::small_config();
  const auto model = init_model(cfg);
  std::vector<double> windows;
  std::vector<int> labels;
  gradcheck::random_batch(6, 24, 17, windows, labels);
  const auto plain = gradcheck::run(model, windows, labels, 1e-5, 0, nullptr);
  CHECK(plain.checked == model.params.size());
  CHECK(plain.max_rel_error < 1e-4);
  const std::uint64_t drop_seed = 77;
  const auto dropped = gradcheck::run(model, windows, labels, 1e-5, 0, &drop_seed);
  CHECK(dropped.max_rel_error < 1e-4);
}

TEST_CASE("sampled gradient check on the default network") {
  DcnnConfig cfg;
  cfg.seed = 2;
  const auto model = init_model(cfg);
  std::vector<double> windows;
  std::vector<int> labels;
  gradcheck::random_batch(4, 200, 19, windows, labels);
  const auto rep = gradcheck::run(model, windows, labels, 1e-5, 12, nullptr);
  CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("non-finite input is reported") {
  auto cfg = gradcheck::small_config();
  const auto model = init_model(cfg);
  std::vector<double> windows(24, std::numeric_limits<double>::quiet_NaN());
  std::vector<int> labels{0};
  std::vector<double> grad;
  CHECK_THROWS_AS(loss_and_grad(model, windows, labels, grad, nullptr), Error);
}

TEST_CASE("adam") {
  std::vector<double> p{1.0, -2.0};
  AdamState s;
  const std::vector<double> zero{0.0, 0.0};
  adam_step(p, zero, s, 0.1);
  CHECK(p == std::vector<double>{1.0, -2.0});
  CHECK(s.t == 1);
  const std::vector<double> g{0.5, -3.0};
  AdamState s2;
  adam_step(p, g, s2, 0.1);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-1.9).epsilon(1e-6));
  std::vector<double> bad{std::numeric_limits<double>::infinity(), 0.0};
  const auto before = p;
  CHECK_THROWS_AS(adam_step(p, bad, s2, 0.1), Error);
  CHECK(p == before);

  auto cfg = gradcheck::small_config();
  cfg.dropout_rate = 0.0;
  auto model = init_model(cfg);
  std::vector<double> windows, grad;
  std::vector<int> labels;
  gradcheck::random_batch(16, 24, 23, windows, labels);
  AdamState st;
  double prev = batch_loss(model, windows, labels);
  int increases = 0;
  for (int i = 0; i < 50; ++i) {
    loss_and_grad(model, windows, labels, grad, nullptr);
    adam_step(model.params, grad, st, 1e-3);
    const double now = batch_loss(model, windows, labels);
    if (now > prev) ++increases;
    prev = now;
  }
  CHECK(increases == 0);
}

TEST_CASE("training learns a separable task and is deterministic") {
  const auto train = separable_windows(400, 1);
  const auto val = separable_windows(80, 2);
  const auto test = separable_windows(200, 3);
  const auto init = init_model(quick_config());
  const auto a = train_dcnn(init, train, val, test, 5);
  const auto b = train_dcnn(init, train, val, test, 5);
  CHECK(a.model.params == b.model.params);
  CHECK(a.history == b.history);
  CHECK(evaluate_dcnn(a.model, test).accuracy >= 0.95);
  const auto& h = a.history;
  double best = -1;
  for (const auto& e : h.epochs) best = std::max(best, e.test_acc);
  CHECK(h.epochs[static_cast<std::size_t>(h.best_epoch)].test_acc == best);
  CHECK(evaluate_dcnn(a.model, test).accuracy == doctest::Approx(best));

  auto honest_cfg = quick_config();
  honest_cfg.selection = Selection::val_accuracy;
  const auto c = train_dcnn(init_model(honest_cfg), train, val, features::WindowTensor{}, 5);
  double best_val = -1;
  for (const auto& e : c.history.epochs) best_val = std::max(best_val, e.val_acc);
  CHECK(c.history.epochs[static_cast<std::size_t>(c.history.best_epoch)].val_acc == best_val);

  CHECK_THROWS_AS(train_dcnn(init, features::WindowTensor{}, val, test, 5), Error);
  CHECK_THROWS_AS(train_dcnn(init, train, val, features::WindowTensor{}, 5), Error);
}

TEST_CASE("early stopping with patience 1") {
  auto cfg = quick_config();
  cfg.patience = 1;
  cfg.max_epochs = 40;
  cfg.learning_rate = 0.05;
  const auto r = train_dcnn(init_model(cfg), separable_windows(120, 4), separable_windows(40, 5),
                            separable_windows(40, 6), 1);
  const auto& h = r.history;
  CHECK(h.stopped_epoch == static_cast<int>(h.epochs.size()) - 1);
  if (h.stopped_epoch < cfg.max_epochs - 1) {
    CHECK(h.epochs.back().val_loss >= h.epochs[h.epochs.size() - 2].val_loss);
  }
  for (std::size_t e = 1; e + 1 < h.epochs.size(); ++e) CHECK(h.epochs[e].val_loss < h.epochs[e - 1].val_loss);
}

TEST_CASE("blob round trip and corruption") {
  auto cfg = quick_config();
  cfg.seed = 31;
  const auto blob = save_initial_weights(cfg);
  const auto m = restore(blob);
  CHECK(m.config == cfg);
  CHECK(m.params == init_model(cfg).params);
  CHECK(serialize(m) == blob);
  CHECK(blob_hash(blob) == blob_hash(save_initial_weights(cfg)));
  CHECK(blob_hash(blob).size() == 16);

  auto bad = blob;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize(bad), Error);
  auto truncated = blob;
  truncated.resize(blob.size() - 3);
  CHECK_THROWS_AS(deserialize(truncated), Error);
  auto extra = blob;
  extra.push_back(0);
  CHECK_THROWS_AS(deserialize(extra), Error);

  const auto path = (std::filesystem::temp_directory_path() / "emgait_blob_test.bin").string();
  write_blob(blob, path);
  CHECK(read_blob(path) == blob);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_blob(path), Error);
}

TEST_CASE("predictions come back in window order") {
  const auto data = separable_windows(30, 8);
  const auto m = init_model(quick_config());
  const auto labels = predict_dcnn(m, data);
  REQUIRE(labels.size() == 30);
  for (std::size_t i = 0; i < 30; ++i) {
    const auto logits = forward(m, data.window(i));
    CHECK(labels[i] == (logits[1] > logits[0] ? 1 : 0));
  }
}
