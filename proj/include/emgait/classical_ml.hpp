#pragma once

// Gaussian naive Bayes, CART decision tree, random forest and linear
// discriminant analysis, plus per-trial random hyperparameter search and
// prediction latency measurement. Class labels are 0..K-1; every argmax tie
// resolves to the lowest class index.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "emgait/matrix.hpp"
#include "emgait/rng.hpp"

namespace emgait::ml {

using Labels = std::vector<int>;

/// Number of classes implied by `y` (max + 1), or `n_classes` when positive.
int resolve_classes(std::span<const int> y, int n_classes = 0);
double accuracy(std::span<const int> predicted, std::span<const int> truth);

// ---- Gaussian naive Bayes -------------------------------------------------

struct GnbParams {
  /// Added to each class variance, relative to that feature's overall
  /// variance (absolute when the feature is constant).
  double var_smoothing = 1e-9;
  friend bool operator==(const GnbParams&, const GnbParams&) = default;
};

struct GnbModel {
  std::vector<double> class_priors;
  Matrix means;      // class x feature
  Matrix variances;  // class x feature, smoothing included
  GnbParams params;
};

/// Throws MissingClass if a class in [0, K) has no samples.
GnbModel train_gnb(const Matrix& X, std::span<const int> y, const GnbParams& params = {}, int n_classes = 0);
/// Per-class joint log likelihood log P(c) + sum_f log N(x_f; mu, var).
std::vector<double> gnb_log_joint(const GnbModel& model, std::span<const double> x);
Labels predict_gnb(const GnbModel& model, const Matrix& X);

// ---- CART decision tree ---------------------------------------------------

enum class Criterion { gini, entropy };
enum class MaxFeatures { all, sqrt, log2 };

std::size_t resolve_max_features(MaxFeatures mf, std::size_t d) noexcept;

struct DtParams {
  int max_depth = 32;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  MaxFeatures max_features = MaxFeatures::all;
  Criterion criterion = Criterion::gini;
  friend bool operator==(const DtParams&, const DtParams&) = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<int> class_counts;
  int prediction = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DtModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  DtParams params;
  int n_classes = 2;
  std::size_t n_features = 0;

  int depth() const;
  friend bool operator==(const DtModel&, const DtModel&) = default;
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child impurity
};

/// Weighted child impurity of splitting rows `idx` at x[feature] <= threshold.
double split_impurity(const Matrix& X, std::span<const int> y, std::span<const std::size_t> idx, int feature,
                      double threshold, int n_classes, Criterion criterion);

/// Greedy CART: candidate thresholds are midpoints of consecutive distinct
/// sorted values; the lowest weighted impurity wins, ties to the lower feature
/// then the lower threshold. Splits are taken even without impurity decrease.
DtModel train_dt(const Matrix& X, std::span<const int> y, const DtParams& params, std::uint64_t seed,
                 int n_classes = 0);
int predict_one(const DtModel& model, std::span<const double> x);
Labels predict_dt(const DtModel& model, const Matrix& X);

// ---- Random forest ---------------------------------------------------------

struct RfParams {
  int n_trees = 100;
  DtParams tree{32, 2, 1, MaxFeatures::sqrt, Criterion::gini};
  bool bootstrap = true;
  friend bool operator==(const RfParams&, const RfParams&) = default;
};

struct RfModel {
  std::vector<DtModel> trees;
  std::vector<std::uint64_t> tree_seeds;
  RfParams params;
  int n_classes = 2;
};

/// Tree t uses seed derive_seed(seed, t); with bootstrap it trains on N rows
/// drawn with replacement from a separate stream of that seed.
RfModel train_rf(const Matrix& X, std::span<const int> y, const RfParams& params, std::uint64_t seed,
                 int n_classes = 0);
/// Majority vote over the per-tree predictions.
int majority_vote(std::span<const int> votes, int n_classes);
Labels predict_rf(const RfModel& model, const Matrix& X);

// ---- Linear discriminant analysis -----------------------------------------

struct LdaParams {
  /// Ridge added to the pooled covariance diagonal, relative to trace / d.
  double ridge_eps = 1e-6;
  friend bool operator==(const LdaParams&, const LdaParams&) = default;
};

struct LdaModel {
  Matrix class_means;                // class x feature
  Matrix pooled_covariance_inverse;  // feature x feature
  std::vector<double> priors;
  Matrix coef;                       // class x feature, Sigma^-1 mu_k
  std::vector<double> intercept;     // -1/2 mu_k' Sigma^-1 mu_k + log pi_k
  LdaParams params;
};

/// Throws MissingClass (a class with < 2 samples) or SingularCovariance.
LdaModel train_lda(const Matrix& X, std::span<const int> y, const LdaParams& params = {}, int n_classes = 0);
std::vector<double> lda_discriminants(const LdaModel& model, std::span<const double> x);
Labels predict_lda(const LdaModel& model, const Matrix& X);

// ---- Uniform model interface ------------------------------------------------

enum class ModelKind { nb, dt, rf, lda };
std::string model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string& s);

using Hyperparams = std::variant<GnbParams, DtParams, RfParams, LdaParams>;
using Model = std::variant<GnbModel, DtModel, RfModel, LdaModel>;

ModelKind kind_of(const Hyperparams& h);
Model train(const Hyperparams& h, const Matrix& X, std::span<const int> y, std::uint64_t seed, int n_classes = 0);
Labels predict(const Model& m, const Matrix& X);

nlohmann::json hyperparams_to_json(const Hyperparams& h);
Hyperparams hyperparams_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const Model& m);
Model model_from_json(const nlohmann::json& j);

// ---- Random search ----------------------------------------------------------

struct IntRange {
  int lo = 0, hi = 0;
};
/// Exponent range for log-uniform draws of 10^u.
struct Log10Range {
  double lo = 0.0, hi = 0.0;
};

struct SearchSpace {
  IntRange max_depth{2, 32};
  IntRange min_samples_split{2, 64};
  IntRange min_samples_leaf{1, 32};
  IntRange n_trees{10, 200};
  std::vector<MaxFeatures> max_features{MaxFeatures::sqrt, MaxFeatures::log2, MaxFeatures::all};
  Criterion criterion = Criterion::gini;
  bool rf_bootstrap = true;
  Log10Range var_smoothing{-12.0, -6.0};
  Log10Range ridge_eps{-9.0, -3.0};
  int n_iter = 20;
  double inner_val_fraction = 0.2;
};

nlohmann::json search_space_to_json(const SearchSpace& s);
SearchSpace search_space_from_json(const nlohmann::json& j);

Hyperparams sample_hyperparams(ModelKind kind, const SearchSpace& space, std::mt19937_64& rng);

struct SearchResult {
  Hyperparams best;
  double best_score = -1.0;
  std::vector<Hyperparams> drawn;
  std::vector<double> scores;  // inner-validation accuracy; -1 when a draw failed to train
};

/// Draws n_iter configurations and scores each on a holdout of
/// round(inner_val_fraction * subjects) (>= 1) whole training subjects. With
/// a single subject the holdout falls back to rows. Ties go to the first draw.
SearchResult random_search(ModelKind kind, const SearchSpace& space, const Matrix& X, std::span<const int> y,
                           std::span<const std::string> subject_ids, std::uint64_t seed, int n_classes = 0);

struct LatencyStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;
  std::vector<double> samples_ms;
};

/// Times `call` `repeats` times after one untimed warm-up call. Throws
/// InvalidConfig for repeats < 3.
LatencyStats measure_latency(const std::function<void()>& call, int repeats);
LatencyStats measure_predict_latency(const Model& model, const Matrix& X_test, int repeats);

}  // namespace emgait::ml
