#include "emgait/classical_ml.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "emgait/error.hpp"
#include "emgait/rng.hpp"
#include "emgait/simd/kernels.hpp"

namespace emgait::ml {
namespace {

int argmax_lowest(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

void check_xy(const Matrix& X, std::span<const int> y) {
  if (X.rows() == 0) throw Error(Errc::empty_input, "no training rows");
  if (X.rows() != y.size()) throw Error(Errc::shape_mismatch, "X and y differ in length");
}

std::vector<int> class_counts(std::span<const int> y, int k) {
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int v : y) ++counts[static_cast<std::size_t>(v)];
  return counts;
}

}  // namespace

int resolve_classes(std::span<const int> y, int n_classes) {
  int mx = -1;
  for (int v : y) {
    if (v < 0) throw Error(Errc::invalid_config, "class labels must be non-negative");
    mx = std::max(mx, v);
  }
  if (n_classes > 0) {
    if (mx >= n_classes) throw Error(Errc::invalid_config, "label exceeds n_classes");
    return n_classes;
  }
  return mx + 1;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw Error(Errc::shape_mismatch, "prediction/truth length differ");
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

// ---- GNB ----

GnbModel train_gnb(const Matrix& X, std::span<const int> y, const GnbParams& params, int n_classes) {
  check_xy(X, y);
  const int k = resolve_classes(y, n_classes);
  const std::size_t d = X.cols();
  const auto counts = class_counts(y, k);
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw Error(Errc::missing_class, "class " + std::to_string(c) + " has no samples");
    }
  }
  const double n = static_cast<double>(X.rows());

  GnbModel m;
  m.params = params;
  m.means = Matrix(static_cast<std::size_t>(k), d);
  m.variances = Matrix(static_cast<std::size_t>(k), d);
  std::vector<double> overall_mean(d, 0.0), overall_var(d, 0.0);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto c = static_cast<std::size_t>(y[r]);
    for (std::size_t f = 0; f < d; ++f) {
      m.means(c, f) += X(r, f);
      overall_mean[f] += X(r, f);
    }
  }
  for (int c = 0; c < k; ++c) {
    for (std::size_t f = 0; f < d; ++f) m.means(c, f) /= counts[c];
  }
  for (double& v : overall_mean) v /= n;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto c = static_cast<std::size_t>(y[r]);
    for (std::size_t f = 0; f < d; ++f) {
      const double dc = X(r, f) - m.means(c, f);
      const double dg = X(r, f) - overall_mean[f];
      m.variances(c, f) += dc * dc;
      overall_var[f] += dg * dg;
    }
  }
  for (std::size_t f = 0; f < d; ++f) {
    const double v = overall_var[f] / n;
    const double eps = params.var_smoothing * (v > 0.0 ? v : 1.0);
    for (int c = 0; c < k; ++c) {
      m.variances(c, f) = m.variances(c, f) / counts[c] + eps;
    }
  }
  for (int c = 0; c < k; ++c) m.class_priors.push_back(counts[c] / n);
  return m;
}

std::vector<double> gnb_log_joint(const GnbModel& m, std::span<const double> x) {
  const std::size_t k = m.class_priors.size();
  std::vector<double> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    double acc = std::log(m.class_priors[c]);
    for (std::size_t f = 0; f < x.size(); ++f) {
      const double var = m.variances(c, f);
      const double dx = x[f] - m.means(c, f);
      acc += -0.5 * std::log(2.0 * std::numbers::pi * var) - dx * dx / (2.0 * var);
    }
    out[c] = acc;
  }
  return out;
}

Labels predict_gnb(const GnbModel& m, const Matrix& X) {
  if (X.cols() != m.means.cols()) throw Error(Errc::shape_mismatch, "GNB input width differs from fit");
  Labels out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = argmax_lowest(gnb_log_joint(m, X.row(r)));
  return out;
}

// ---- CART ----

std::size_t resolve_max_features(MaxFeatures mf, std::size_t d) noexcept {
  switch (mf) {
    case MaxFeatures::all: return d;
    case MaxFeatures::sqrt: return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
    case MaxFeatures::log2: return std::max<std::size_t>(1, static_cast<std::size_t>(std::log2(static_cast<double>(d))));
  }
  return d;
}

int DtModel::depth() const {
  if (nodes.empty()) return 0;
  int best = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [node, dep] = stack.back();
    stack.pop_back();
    best = std::max(best, dep);
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    if (!n.is_leaf()) {
      stack.emplace_back(n.left, dep + 1);
      stack.emplace_back(n.right, dep + 1);
    }
  }
  return best;
}

namespace {

double node_impurity(std::span<const int> counts, int total, Criterion criterion) {
  if (total == 0) return 0.0;
  const double n = total;
  double acc = 0.0;
  if (criterion == Criterion::gini) {
    for (int c : counts) acc += (c / n) * (c / n);
    return 1.0 - acc;
  }
  for (int c : counts) {
    if (c > 0) acc -= (c / n) * std::log2(c / n);
  }
  return acc;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const int> y, const DtParams& p, int k, Rng& rng)
      : X_(X), y_(y), p_(p), k_(k), rng_(rng), d_(X.cols()), n_feat_(resolve_max_features(p.max_features, d_)) {}

  DtModel build(std::vector<std::size_t> idx) {
    model_.params = p_;
    model_.n_classes = k_;
    model_.n_features = d_;
    grow(std::move(idx), 0);
    return std::move(model_);
  }

 private:
  int grow(std::vector<std::size_t> idx, int depth) {
    const int id = static_cast<int>(model_.nodes.size());
    model_.nodes.emplace_back();
    std::vector<int> counts(static_cast<std::size_t>(k_), 0);
    for (std::size_t i : idx) ++counts[static_cast<std::size_t>(y_[i])];
    {
      TreeNode& node = model_.nodes.back();
      node.class_counts = counts;
      node.prediction = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    }
    const int n = static_cast<int>(idx.size());
    const bool pure = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;
    if (pure || depth >= p_.max_depth || n < p_.min_samples_split || n < 2 * p_.min_samples_leaf) return id;

    const Split split = best_split(idx);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) {
      (X_(i, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = model_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> f(d_);
    std::iota(f.begin(), f.end(), 0);
    if (n_feat_ >= d_) return f;
    for (std::size_t i = 0; i < n_feat_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d_ - 1);
      std::swap(f[i], f[pick(rng_)]);
    }
    f.resize(n_feat_);
    std::sort(f.begin(), f.end());
    return f;
  }

  Split best_split(const std::vector<std::size_t>& idx) {
    const int n = static_cast<int>(idx.size());
    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, int>> vals(idx.size());
    std::vector<int> total(static_cast<std::size_t>(k_), 0);
    for (std::size_t i : idx) ++total[static_cast<std::size_t>(y_[i])];
    std::vector<int> left(static_cast<std::size_t>(k_)), right(static_cast<std::size_t>(k_));

    for (std::size_t f : candidate_features()) {
      for (std::size_t j = 0; j < idx.size(); ++j) vals[j] = {X_(idx[j], f), y_[idx[j]]};
      std::sort(vals.begin(), vals.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::fill(left.begin(), left.end(), 0);
      right = total;
      for (int j = 0; j + 1 < n; ++j) {
        const auto c = static_cast<std::size_t>(vals[static_cast<std::size_t>(j)].second);
        ++left[c];
        --right[c];
        const double v = vals[static_cast<std::size_t>(j)].first;
        const double next = vals[static_cast<std::size_t>(j) + 1].first;
        if (!(next > v)) continue;
        const int nl = j + 1, nr = n - nl;
        if (nl < p_.min_samples_leaf || nr < p_.min_samples_leaf) continue;
        const double imp = (nl * node_impurity(left, nl, p_.criterion) + nr * node_impurity(right, nr, p_.criterion)) / n;
        if (imp < best.impurity - 1e-12) {
          double thr = v + (next - v) / 2.0;
          if (!(thr < next)) thr = v;
          best = {static_cast<int>(f), thr, imp};
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  std::span<const int> y_;
  DtParams p_;
  int k_;
  Rng& rng_;
  std::size_t d_;
  std::size_t n_feat_;
  DtModel model_;
};

void check_dt_params(const DtParams& p) {
  if (p.max_depth < 0 || p.min_samples_split < 2 || p.min_samples_leaf < 1) {
    throw Error(Errc::invalid_config, "decision tree needs max_depth >= 0, min_samples_split >= 2, min_samples_leaf >= 1");
  }
}

DtModel train_tree(const Matrix& X, std::span<const int> y, const DtParams& p, int k, Rng& rng,
                   std::vector<std::size_t> idx) {
  return TreeBuilder(X, y, p, k, rng).build(std::move(idx));
}

}  // namespace

double split_impurity(const Matrix& X, std::span<const int> y, std::span<const std::size_t> idx, int feature,
                      double threshold, int n_classes, Criterion criterion) {
  std::vector<int> left(static_cast<std::size_t>(n_classes), 0), right(static_cast<std::size_t>(n_classes), 0);
  int nl = 0, nr = 0;
  for (std::size_t i : idx) {
    if (X(i, static_cast<std::size_t>(feature)) <= threshold) {
      ++left[static_cast<std::size_t>(y[i])];
      ++nl;
    } else {
      ++right[static_cast<std::size_t>(y[i])];
      ++nr;
    }
  }
  const double n = nl + nr;
  return (nl * node_impurity(left, nl, criterion) + nr * node_impurity(right, nr, criterion)) / n;
}

DtModel train_dt(const Matrix& X, std::span<const int> y, const DtParams& params, std::uint64_t seed,
                 int n_classes) {
  check_xy(X, y);
  check_dt_params(params);
  const int k = resolve_classes(y, n_classes);
  Rng rng(derive_seed(seed, 0));
  std::vector<std::size_t> idx(X.rows());
  std::iota(idx.begin(), idx.end(), 0);
  return train_tree(X, y, params, k, rng, std::move(idx));
}

int predict_one(const DtModel& m, std::span<const double> x) {
  const TreeNode* node = &m.nodes[0];
  while (!node->is_leaf()) {
    node = &m.nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                                        : node->right)];
  }
  return node->prediction;
}

Labels predict_dt(const DtModel& m, const Matrix& X) {
  if (X.cols() != m.n_features) throw Error(Errc::shape_mismatch, "tree input width differs from fit");
  Labels out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict_one(m, X.row(r));
  return out;
}

// ---- RF ----

RfModel train_rf(const Matrix& X, std::span<const int> y, const RfParams& params, std::uint64_t seed,
                 int n_classes) {
  check_xy(X, y);
  check_dt_params(params.tree);
  if (params.n_trees < 1) throw Error(Errc::invalid_config, "n_trees must be >= 1");
  const int k = resolve_classes(y, n_classes);
  RfModel m;
  m.params = params;
  m.n_classes = k;
  const std::size_t n = X.rows();
  for (int t = 0; t < params.n_trees; ++t) {
    const std::uint64_t tree_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    std::vector<std::size_t> idx(n);
    if (params.bootstrap) {
      Rng boot(derive_seed(tree_seed, 0xB0075742));
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      for (auto& i : idx) i = draw(boot);
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    Rng rng(derive_seed(tree_seed, 0));
    m.trees.push_back(train_tree(X, y, params.tree, k, rng, std::move(idx)));
    m.tree_seeds.push_back(tree_seed);
  }
  return m;
}

int majority_vote(std::span<const int> votes, int n_classes) {
  std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
  for (int v : votes) ++counts[static_cast<std::size_t>(v)];
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

Labels predict_rf(const RfModel& m, const Matrix& X) {
  Labels out(X.rows());
  std::vector<int> votes(m.trees.size());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto x = X.row(r);
    for (std::size_t t = 0; t < m.trees.size(); ++t) votes[t] = predict_one(m.trees[t], x);
    out[r] = majority_vote(votes, m.n_classes);
  }
  return out;
}

// ---- LDA ----

namespace {

// In-place lower Cholesky; false when the matrix is not positive definite.
bool cholesky(Matrix& a) {
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double s = a(j, j);
    for (std::size_t k = 0; k < j; ++k) s -= a(j, k) * a(j, k);
    if (!(s > 0.0) || !std::isfinite(s)) return false;
    const double l = std::sqrt(s);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = a(i, j);
      for (std::size_t k = 0; k < j; ++k) t -= a(i, k) * a(j, k);
      a(i, j) = t / l;
    }
    for (std::size_t i = 0; i < j; ++i) a(i, j) = 0.0;
  }
  return true;
}

std::vector<double> cholesky_solve(const Matrix& L, std::span<const double> b) {
  const std::size_t n = L.rows();
  std::vector<double> z(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) z[i] -= L(i, k) * z[k];
    z[i] /= L(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) z[ii] -= L(k, ii) * z[k];
    z[ii] /= L(ii, ii);
  }
  return z;
}

}  // namespace

LdaModel train_lda(const Matrix& X, std::span<const int> y, const LdaParams& params, int n_classes) {
  check_xy(X, y);
  const int k = resolve_classes(y, n_classes);
  if (k < 2) throw Error(Errc::missing_class, "LDA needs at least 2 classes");
  const auto counts = class_counts(y, k);
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] < 2) {
      throw Error(Errc::missing_class, "class " + std::to_string(c) + " has fewer than 2 samples");
    }
  }
  const std::size_t d = X.cols();
  const std::size_t n = X.rows();
  if (n <= static_cast<std::size_t>(k)) throw Error(Errc::singular_covariance, "too few rows for pooled covariance");

  LdaModel m;
  m.params = params;
  m.class_means = Matrix(static_cast<std::size_t>(k), d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < d; ++f) m.class_means(static_cast<std::size_t>(y[r]), f) += X(r, f);
  }
  for (int c = 0; c < k; ++c) {
    for (std::size_t f = 0; f < d; ++f) m.class_means(static_cast<std::size_t>(c), f) /= counts[c];
  }
  Matrix cov(d, d);
  std::vector<double> dx(d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto c = static_cast<std::size_t>(y[r]);
    for (std::size_t f = 0; f < d; ++f) dx[f] = X(r, f) - m.class_means(c, f);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j <= i; ++j) cov(i, j) += dx[i] * dx[j];
    }
  }
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      cov(i, j) /= static_cast<double>(n - static_cast<std::size_t>(k));
      cov(j, i) = cov(i, j);
    }
    trace += cov(i, i);
  }
  const double ridge = params.ridge_eps * (trace > 0.0 ? trace / static_cast<double>(d) : 1.0);
  for (std::size_t i = 0; i < d; ++i) cov(i, i) += ridge;

  Matrix L = cov;
  if (!cholesky(L)) throw Error(Errc::singular_covariance, "pooled covariance is not positive definite");

  m.pooled_covariance_inverse = Matrix(d, d);
  std::vector<double> e(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    const auto col = cholesky_solve(L, e);
    for (std::size_t i = 0; i < d; ++i) m.pooled_covariance_inverse(i, j) = col[i];
  }
  m.coef = Matrix(static_cast<std::size_t>(k), d);
  for (int c = 0; c < k; ++c) {
    const auto mu = m.class_means.row(static_cast<std::size_t>(c));
    const auto w = cholesky_solve(L, mu);
    double quad = 0.0;
    for (std::size_t f = 0; f < d; ++f) {
      m.coef(static_cast<std::size_t>(c), f) = w[f];
      quad += mu[f] * w[f];
    }
    const double prior = static_cast<double>(counts[c]) / static_cast<double>(n);
    m.priors.push_back(prior);
    m.intercept.push_back(-0.5 * quad + std::log(prior));
  }
  return m;
}

std::vector<double> lda_discriminants(const LdaModel& m, std::span<const double> x) {
  const auto& kern = simd::kernels();
  std::vector<double> out(m.intercept.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = kern.dot(x.data(), m.coef.row(c).data(), x.size()) + m.intercept[c];
  return out;
}

Labels predict_lda(const LdaModel& m, const Matrix& X) {
  if (X.cols() != m.coef.cols()) throw Error(Errc::shape_mismatch, "LDA input width differs from fit");
  Labels out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = argmax_lowest(lda_discriminants(m, X.row(r)));
  return out;
}

// ---- uniform interface ----

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::nb: return "nb";
    case ModelKind::dt: return "dt";
    case ModelKind::rf: return "rf";
    case ModelKind::lda: return "lda";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "nb") return ModelKind::nb;
  if (s == "dt") return ModelKind::dt;
  if (s == "rf") return ModelKind::rf;
  if (s == "lda") return ModelKind::lda;
  throw Error(Errc::invalid_config, "unknown classical model '" + s + "'");
}

ModelKind kind_of(const Hyperparams& h) {
  return std::visit(
      [](const auto& p) -> ModelKind {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GnbParams>) return ModelKind::nb;
        if constexpr (std::is_same_v<T, DtParams>) return ModelKind::dt;
        if constexpr (std::is_same_v<T, RfParams>) return ModelKind::rf;
        return ModelKind::lda;
      },
      h);
}

Model train(const Hyperparams& h, const Matrix& X, std::span<const int> y, std::uint64_t seed, int n_classes) {
  return std::visit(
      [&](const auto& p) -> Model {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GnbParams>) return train_gnb(X, y, p, n_classes);
        if constexpr (std::is_same_v<T, DtParams>) return train_dt(X, y, p, seed, n_classes);
        if constexpr (std::is_same_v<T, RfParams>) return train_rf(X, y, p, seed, n_classes);
        if constexpr (std::is_same_v<T, LdaParams>) return train_lda(X, y, p, n_classes);
      },
      h);
}

Labels predict(const Model& m, const Matrix& X) {
  return std::visit(
      [&](const auto& model) -> Labels {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, GnbModel>) return predict_gnb(model, X);
        if constexpr (std::is_same_v<T, DtModel>) return predict_dt(model, X);
        if constexpr (std::is_same_v<T, RfModel>) return predict_rf(model, X);
        if constexpr (std::is_same_v<T, LdaModel>) return predict_lda(model, X);
      },
      m);
}

// ---- JSON ----

namespace {

const char* max_features_name(MaxFeatures mf) {
  switch (mf) {
    case MaxFeatures::all: return "all";
    case MaxFeatures::sqrt: return "sqrt";
    case MaxFeatures::log2: return "log2";
  }
  return "all";
}

MaxFeatures parse_max_features(const std::string& s) {
  if (s == "all") return MaxFeatures::all;
  if (s == "sqrt") return MaxFeatures::sqrt;
  if (s == "log2") return MaxFeatures::log2;
  throw Error(Errc::invalid_config, "unknown max_features '" + s + "'");
}

Criterion parse_criterion(const std::string& s) {
  if (s == "gini") return Criterion::gini;
  if (s == "entropy") return Criterion::entropy;
  throw Error(Errc::invalid_config, "unknown criterion '" + s + "'");
}

nlohmann::json dt_params_json(const DtParams& p) {
  return {{"max_depth", p.max_depth},
          {"min_samples_split", p.min_samples_split},
          {"min_samples_leaf", p.min_samples_leaf},
          {"max_features", max_features_name(p.max_features)},
          {"criterion", p.criterion == Criterion::gini ? "gini" : "entropy"}};
}

DtParams dt_params_from(const nlohmann::json& j) {
  DtParams p;
  p.max_depth = j.at("max_depth").get<int>();
  p.min_samples_split = j.at("min_samples_split").get<int>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  p.max_features = parse_max_features(j.value("max_features", "all"));
  p.criterion = parse_criterion(j.value("criterion", "gini"));
  return p;
}

nlohmann::json tree_json(const DtModel& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"class_counts", n.class_counts},
                     {"prediction", n.prediction}});
  }
  return {{"params", dt_params_json(t.params)},
          {"n_classes", t.n_classes},
          {"n_features", t.n_features},
          {"nodes", nodes}};
}

DtModel tree_from(const nlohmann::json& j) {
  DtModel t;
  t.params = dt_params_from(j.at("params"));
  t.n_classes = j.at("n_classes").get<int>();
  t.n_features = j.at("n_features").get<std::size_t>();
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.feature = n.at("feature").get<int>();
    node.threshold = n.at("threshold").get<double>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.class_counts = n.at("class_counts").get<std::vector<int>>();
    node.prediction = n.at("prediction").get<int>();
    t.nodes.push_back(std::move(node));
  }
  return t;
}

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from(const nlohmann::json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

}  // namespace

nlohmann::json hyperparams_to_json(const Hyperparams& h) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GnbParams>) return {{"model", "nb"}, {"var_smoothing", p.var_smoothing}};
        if constexpr (std::is_same_v<T, DtParams>) {
          auto j = dt_params_json(p);
          j["model"] = "dt";
          return j;
        }
        if constexpr (std::is_same_v<T, RfParams>) {
          auto j = dt_params_json(p.tree);
          j["model"] = "rf";
          j["n_trees"] = p.n_trees;
          j["bootstrap"] = p.bootstrap;
          return j;
        }
        if constexpr (std::is_same_v<T, LdaParams>) return {{"model", "lda"}, {"ridge_eps", p.ridge_eps}};
      },
      h);
}

Hyperparams hyperparams_from_json(const nlohmann::json& j) {
  try {
    switch (parse_model_kind(j.at("model").get<std::string>())) {
      case ModelKind::nb: return GnbParams{j.at("var_smoothing").get<double>()};
      case ModelKind::dt: return dt_params_from(j);
      case ModelKind::rf: return RfParams{j.at("n_trees").get<int>(), dt_params_from(j), j.at("bootstrap").get<bool>()};
      case ModelKind::lda: return LdaParams{j.at("ridge_eps").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, std::string("hyperparameters: ") + e.what());
  }
  throw Error(Errc::invalid_config, "hyperparameters: unknown model");
}

nlohmann::json model_to_json(const Model& m) {
  return std::visit(
      [](const auto& model) -> nlohmann::json {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, GnbModel>) {
          return {{"model", "nb"},
                  {"params", hyperparams_to_json(model.params)},
                  {"class_priors", model.class_priors},
                  {"means", matrix_json(model.means)},
                  {"variances", matrix_json(model.variances)}};
        }
        if constexpr (std::is_same_v<T, DtModel>) {
          auto j = tree_json(model);
          j["model"] = "dt";
          return j;
        }
        if constexpr (std::is_same_v<T, RfModel>) {
          nlohmann::json trees = nlohmann::json::array();
          for (const auto& t : model.trees) trees.push_back(tree_json(t));
          return {{"model", "rf"},
                  {"params", hyperparams_to_json(model.params)},
                  {"n_classes", model.n_classes},
                  {"tree_seeds", model.tree_seeds},
                  {"trees", trees}};
        }
        if constexpr (std::is_same_v<T, LdaModel>) {
          return {{"model", "lda"},
                  {"params", hyperparams_to_json(model.params)},
                  {"class_means", matrix_json(model.class_means)},
                  {"pooled_covariance_inverse", matrix_json(model.pooled_covariance_inverse)},
                  {"priors", model.priors},
                  {"coef", matrix_json(model.coef)},
                  {"intercept", model.intercept}};
        }
      },
      m);
}

Model model_from_json(const nlohmann::json& j) {
  try {
    switch (parse_model_kind(j.at("model").get<std::string>())) {
      case ModelKind::nb: {
        GnbModel m;
        m.params = std::get<GnbParams>(hyperparams_from_json(j.at("params")));
        m.class_priors = j.at("class_priors").get<std::vector<double>>();
        m.means = matrix_from(j.at("means"));
        m.variances = matrix_from(j.at("variances"));
        return m;
      }
      case ModelKind::dt: return tree_from(j);
      case ModelKind::rf: {
        RfModel m;
        m.params = std::get<RfParams>(hyperparams_from_json(j.at("params")));
        m.n_classes = j.at("n_classes").get<int>();
        m.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
        for (const auto& t : j.at("trees")) m.trees.push_back(tree_from(t));
        return m;
      }
      case ModelKind::lda: {
        LdaModel m;
        m.params = std::get<LdaParams>(hyperparams_from_json(j.at("params")));
        m.class_means = matrix_from(j.at("class_means"));
        m.pooled_covariance_inverse = matrix_from(j.at("pooled_covariance_inverse"));
        m.priors = j.at("priors").get<std::vector<double>>();
        m.coef = matrix_from(j.at("coef"));
        m.intercept = j.at("intercept").get<std::vector<double>>();
        return m;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_file, std::string("model JSON: ") + e.what());
  }
  throw Error(Errc::malformed_file, "model JSON: unknown model");
}

nlohmann::json search_space_to_json(const SearchSpace& s) {
  nlohmann::json mf = nlohmann::json::array();
  for (auto m : s.max_features) mf.push_back(max_features_name(m));
  return {{"max_depth", {s.max_depth.lo, s.max_depth.hi}},
          {"min_samples_split", {s.min_samples_split.lo, s.min_samples_split.hi}},
          {"min_samples_leaf", {s.min_samples_leaf.lo, s.min_samples_leaf.hi}},
          {"n_trees", {s.n_trees.lo, s.n_trees.hi}},
          {"max_features", mf},
          {"criterion", s.criterion == Criterion::gini ? "gini" : "entropy"},
          {"rf_bootstrap", s.rf_bootstrap},
          {"log10_var_smoothing", {s.var_smoothing.lo, s.var_smoothing.hi}},
          {"log10_ridge_eps", {s.ridge_eps.lo, s.ridge_eps.hi}},
          {"n_iter", s.n_iter},
          {"inner_val_fraction", s.inner_val_fraction}};
}

SearchSpace search_space_from_json(const nlohmann::json& j) {
  SearchSpace s;
  try {
    auto int_range = [&](const char* key, IntRange& r) {
      if (j.contains(key)) r = {j[key].at(0).get<int>(), j[key].at(1).get<int>()};
    };
    auto log_range = [&](const char* key, Log10Range& r) {
      if (j.contains(key)) r = {j[key].at(0).get<double>(), j[key].at(1).get<double>()};
    };
    int_range("max_depth", s.max_depth);
    int_range("min_samples_split", s.min_samples_split);
    int_range("min_samples_leaf", s.min_samples_leaf);
    int_range("n_trees", s.n_trees);
    if (j.contains("max_features")) {
      s.max_features.clear();
      for (const auto& m : j["max_features"]) s.max_features.push_back(parse_max_features(m.get<std::string>()));
    }
    if (j.contains("criterion")) s.criterion = parse_criterion(j["criterion"].get<std::string>());
    s.rf_bootstrap = j.value("rf_bootstrap", s.rf_bootstrap);
    log_range("log10_var_smoothing", s.var_smoothing);
    log_range("log10_ridge_eps", s.ridge_eps);
    s.n_iter = j.value("n_iter", s.n_iter);
    s.inner_val_fraction = j.value("inner_val_fraction", s.inner_val_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, std::string("search space: ") + e.what());
  }
  if (s.n_iter < 1) throw Error(Errc::invalid_config, "n_iter must be >= 1");
  if (s.max_features.empty()) throw Error(Errc::invalid_config, "max_features choices must be nonempty");
  return s;
}

// ---- search ----

Hyperparams sample_hyperparams(ModelKind kind, const SearchSpace& space, std::mt19937_64& rng) {
  auto uniform_int = [&](IntRange r) { return std::uniform_int_distribution<int>(r.lo, r.hi)(rng); };
  auto log_uniform = [&](Log10Range r) {
    return std::pow(10.0, std::uniform_real_distribution<double>(r.lo, r.hi)(rng));
  };
  auto tree = [&](bool with_features) {
    DtParams p;
    p.max_depth = uniform_int(space.max_depth);
    p.min_samples_split = uniform_int(space.min_samples_split);
    p.min_samples_leaf = uniform_int(space.min_samples_leaf);
    p.criterion = space.criterion;
    if (with_features) {
      p.max_features = space.max_features[std::uniform_int_distribution<std::size_t>(0, space.max_features.size() - 1)(rng)];
    }
    return p;
  };
  switch (kind) {
    case ModelKind::nb: return GnbParams{log_uniform(space.var_smoothing)};
    case ModelKind::dt: return tree(false);
    case ModelKind::rf: {
      RfParams p;
      p.n_trees = uniform_int(space.n_trees);
      p.tree = tree(true);
      p.bootstrap = space.rf_bootstrap;
      return p;
    }
    case ModelKind::lda: return LdaParams{log_uniform(space.ridge_eps)};
  }
  throw Error(Errc::invalid_config, "unknown model kind");
}

SearchResult random_search(ModelKind kind, const SearchSpace& space, const Matrix& X, std::span<const int> y,
                           std::span<const std::string> subject_ids, std::uint64_t seed, int n_classes) {
  check_xy(X, y);
  if (space.n_iter < 1) throw Error(Errc::invalid_config, "n_iter must be >= 1");
  if (subject_ids.size() != X.rows()) throw Error(Errc::shape_mismatch, "subject ids length differs from X");
  const int k = resolve_classes(y, n_classes);

  Rng rng(derive_seed(seed, stream::search));
  std::set<std::string> unique(subject_ids.begin(), subject_ids.end());
  std::vector<std::string> subjects(unique.begin(), unique.end());
  std::vector<std::size_t> train_idx, val_idx;
  if (subjects.size() >= 2) {
    std::shuffle(subjects.begin(), subjects.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(space.inner_val_fraction * static_cast<double>(subjects.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, subjects.size() - 1);
    const std::set<std::string> val(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_val));
    for (std::size_t i = 0; i < X.rows(); ++i) (val.contains(subject_ids[i]) ? val_idx : train_idx).push_back(i);
  } else {
    std::vector<std::size_t> rows(X.rows());
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_val = static_cast<std::size_t>(std::llround(space.inner_val_fraction * static_cast<double>(rows.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, std::max<std::size_t>(1, rows.size() - 1));
    val_idx.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_idx.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
  }

  const Matrix X_tr = X.select_rows(train_idx);
  const Matrix X_val = X.select_rows(val_idx);
  Labels y_tr, y_val;
  for (std::size_t i : train_idx) y_tr.push_back(y[i]);
  for (std::size_t i : val_idx) y_val.push_back(y[i]);

  SearchResult res;
  for (int it = 0; it < space.n_iter; ++it) {
    Hyperparams h = sample_hyperparams(kind, space, rng);
    double score = -1.0;
    if (!train_idx.empty()) {
      try {
        const Model m = train(h, X_tr, y_tr, derive_seed(seed, stream::fit), k);
        score = accuracy(predict(m, X_val), y_val);
      } catch (const Error&) {
        score = -1.0;
      }
    }
    if (res.drawn.empty() || score > res.best_score) {
      res.best = h;
      res.best_score = score;
    }
    res.drawn.push_back(std::move(h));
    res.scores.push_back(score);
  }
  return res;
}

LatencyStats measure_latency(const std::function<void()>& call, int repeats) {
  if (repeats < 3) throw Error(Errc::invalid_config, "latency measurement needs repeats >= 3");
  using clock = std::chrono::steady_clock;
  call();
  LatencyStats s;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = clock::now();
    call();
    const auto t1 = clock::now();
    s.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  double mean = 0.0;
  for (double v : s.samples_ms) mean += v;
  mean /= repeats;
  double ss = 0.0;
  for (double v : s.samples_ms) ss += (v - mean) * (v - mean);
  s.mean_ms = mean;
  s.std_ms = std::sqrt(ss / repeats);
  return s;
}

LatencyStats measure_predict_latency(const Model& model, const Matrix& X_test, int repeats) {
  volatile std::size_t sink = 0;
  return measure_latency(
      [&] {
        const Labels p = predict(model, X_test);
        sink = sink + p.size();
      },
      repeats);
}

}  // namespace emgait::ml
