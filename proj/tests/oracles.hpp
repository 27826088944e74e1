#pragma once

// Independent straight-line reimplementations used as test oracles. Nothing
// here calls into the library's numeric code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline int zc(const std::vector<double>& w, double theta) {
  int n = 0;
  for (std::size_t i = 1; i < w.size(); ++i) {
    const bool opposite = (w[i - 1] > 0 && w[i] < 0) || (w[i - 1] < 0 && w[i] > 0);
    if (opposite && std::abs(w[i - 1] - w[i]) >= theta) ++n;
  }
  return n;
}

inline double mean(const std::vector<double>& w) {
  long double s = 0;
  for (double v : w) s += v;
  return static_cast<double>(s / w.size());
}

inline double mav(const std::vector<double>& w) {
  long double s = 0;
  for (double v : w) s += std::abs(v);
  return static_cast<double>(s / w.size());
}

inline double sd(const std::vector<double>& w) {
  const long double m = mean(w);
  long double s = 0;
  for (double v : w) s += (v - m) * (v - m);
  return static_cast<double>(std::sqrt(s / w.size()));
}

inline double mad(const std::vector<double>& w) {
  const long double m = mean(w);
  long double s = 0;
  for (double v : w) s += std::abs(v - m);
  return static_cast<double>(s / w.size());
}

/// Cyclic Jacobi rotations. Returns eigenvalues (descending) and the matching
/// eigenvectors as rows.
inline std::pair<std::vector<double>, Mat> jacobi_eigen(Mat a) {
  const std::size_t n = a.size();
  Mat v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  std::vector<double> vals;
  Mat vecs;
  for (std::size_t i : order) {
    vals.push_back(a[i][i]);
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k][i];
    vecs.push_back(col);
  }
  return {vals, vecs};
}

inline Mat sample_covariance(const Mat& X, std::vector<double>& mu) {
  const std::size_t n = X.size(), d = X[0].size();
  mu.assign(d, 0.0);
  for (const auto& r : X)
    for (std::size_t j = 0; j < d; ++j) mu[j] += r[j];
  for (double& m : mu) m /= n;
  Mat c(d, std::vector<double>(d, 0.0));
  for (const auto& r : X)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) c[i][j] += (r[i] - mu[i]) * (r[j] - mu[j]);
  for (auto& row : c)
    for (double& x : row) x /= (n - 1);
  return c;
}

struct GiniSplit {
  int feature = -1;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();
};

inline double gini(const std::vector<int>& labels, int k) {
  if (labels.empty()) return 0.0;
  double g = 1.0;
  for (int c = 0; c < k; ++c) {
    const double p = static_cast<double>(std::count(labels.begin(), labels.end(), c)) / labels.size();
    g -= p * p;
  }
  return g;
}

/// Every feature, every midpoint between consecutive distinct values; first minimum wins.
inline GiniSplit exhaustive_gini(const Mat& X, const std::vector<int>& y, int k) {
  GiniSplit best;
  const std::size_t d = X[0].size();
  for (std::size_t f = 0; f < d; ++f) {
    std::set<double> vals;
    for (const auto& r : X) vals.insert(r[f]);
    std::vector<double> sorted(vals.begin(), vals.end());
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      const double thr = (sorted[i] + sorted[i + 1]) / 2.0;
      std::vector<int> l, r;
      for (std::size_t s = 0; s < X.size(); ++s) (X[s][f] <= thr ? l : r).push_back(y[s]);
      const double imp = (l.size() * gini(l, k) + r.size() * gini(r, k)) / X.size();
      if (imp < best.impurity - 1e-12) best = {static_cast<int>(f), thr, imp};
    }
  }
  return best;
}

/// argmax_c log p(c) + sum_f log N(x_f; mean_cf, var_cf + eps_f).
inline int gaussian_bayes(const Mat& X, const std::vector<int>& y, int k, const std::vector<double>& eps,
                          const std::vector<double>& x) {
  const std::size_t d = X[0].size();
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    std::vector<double> m(d, 0.0), v(d, 0.0);
    int n = 0;
    for (std::size_t s = 0; s < X.size(); ++s) {
      if (y[s] != c) continue;
      ++n;
      for (std::size_t f = 0; f < d; ++f) m[f] += X[s][f];
    }
    for (double& mm : m) mm /= n;
    for (std::size_t s = 0; s < X.size(); ++s) {
      if (y[s] != c) continue;
      for (std::size_t f = 0; f < d; ++f) v[f] += (X[s][f] - m[f]) * (X[s][f] - m[f]);
    }
    double score = std::log(static_cast<double>(n) / X.size());
    for (std::size_t f = 0; f < d; ++f) {
      const double var = v[f] / n + eps[f];
      score += std::log(std::exp(-(x[f] - m[f]) * (x[f] - m[f]) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var));
    }
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return best;
}

/// Gauss-Jordan with partial pivoting: solves A x = b.
inline std::vector<double> solve(Mat a, std::vector<double> b) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return b;
}

/// out[t][f] = b[f] + sum_k sum_c in[t+k][c] * w[f][k][c]
inline Mat conv1d(const Mat& in, const std::vector<Mat>& w, const std::vector<double>& b) {
  const std::size_t L = in.size(), F = w.size(), K = w[0].size(), C = in[0].size();
  Mat out(L - K + 1, std::vector<double>(F, 0.0));
  for (std::size_t t = 0; t + K <= L; ++t)
    for (std::size_t f = 0; f < F; ++f) {
      double s = b[f];
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t c = 0; c < C; ++c) s += in[t + k][c] * w[f][k][c];
      out[t][f] = s;
    }
  return out;
}

}  // namespace oracle
