#include "emgait/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "emgait/error.hpp"

namespace emgait::pca {
namespace {

// Householder reduction of the symmetric matrix held in V to tridiagonal form
// (d: diagonal, e: sub-diagonal); V accumulates the transformation.
void tridiagonalize(Matrix& V, std::vector<double>& d, std::vector<double>& e) {
  const int n = static_cast<int>(V.rows());
  for (int j = 0; j < n; ++j) d[j] = V(n - 1, j);

  for (int i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (int k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (int j = 0; j < i; ++j) {
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
        V(j, i) = 0.0;
      }
    } else {
      for (int k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (int j = 0; j < i; ++j) e[j] = 0.0;

      for (int j = 0; j < i; ++j) {
        f = d[j];
        V(j, i) = f;
        g = e[j] + V(j, j) * f;
        for (int k = j + 1; k <= i - 1; ++k) {
          g += V(k, j) * d[k];
          e[k] += V(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (int j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (int j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (int j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (int k = j; k <= i - 1; ++k) V(k, j) -= (f * e[k] + g * d[k]);
        d[j] = V(i - 1, j);
        V(i, j) = 0.0;
      }
    }
    d[i] = h;
  }

  for (int i = 0; i < n - 1; ++i) {
    V(n - 1, i) = V(i, i);
    V(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (int k = 0; k <= i; ++k) d[k] = V(k, i + 1) / h;
      for (int j = 0; j <= i; ++j) {
        double g = 0.0;
        for (int k = 0; k <= i; ++k) g += V(k, i + 1) * V(k, j);
        for (int k = 0; k <= i; ++k) V(k, j) -= g * d[k];
      }
    }
    for (int k = 0; k <= i; ++k) V(k, i + 1) = 0.0;
  }
  for (int j = 0; j < n; ++j) {
    d[j] = V(n - 1, j);
    V(n - 1, j) = 0.0;
  }
  V(n - 1, n - 1) = 1.0;
  e[0] = 0.0;
}

// Implicit-shift QL iteration on the tridiagonal form.
void tridiagonal_ql(Matrix& V, std::vector<double>& d, std::vector<double>& e) {
  const int n = static_cast<int>(V.rows());
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;

  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  for (int l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    int m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > 60) throw Error(Errc::degenerate_input, "eigensolver failed to converge");
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (int i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (int i = m - 1; i >= l; --i) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[i];
          h = c * p;
          r = std::hypot(p, e[i]);
          e[i + 1] = s * r;
          s = e[i] / r;
          c = p / r;
          p = c * d[i] - s * g;
          d[i + 1] = h + s * (c * g + s * d[i]);
          for (int k = 0; k < n; ++k) {
            h = V(k, i + 1);
            V(k, i + 1) = s * V(k, i) + c * h;
            V(k, i) = c * V(k, i) - s * h;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }
}

}  // namespace

SymmetricEigen symmetric_eigen(const Matrix& a) {
  const std::size_t n = a.rows();
  if (n == 0 || a.cols() != n) throw Error(Errc::shape_mismatch, "symmetric_eigen needs a square matrix");
  SymmetricEigen out;
  Matrix V = a;
  std::vector<double> d(n), e(n);
  if (n == 1) {
    out.values = {a(0, 0)};
    out.vectors = Matrix(1, 1, 1.0);
    return out;
  }
  tridiagonalize(V, d, e);
  tridiagonal_ql(V, d, e);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = d[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = V(i, order[j]);
  }
  return out;
}

Matrix covariance(const Matrix& X, std::vector<double>* mean_out) {
  const std::size_t n = X.rows(), d = X.cols();
  if (n < 2) throw Error(Errc::degenerate_input, "covariance needs at least 2 rows");
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += X(r, c);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix cov(d, d);
  std::vector<double> centred(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) centred[c] = X(r, c) - mean[c];
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) cov(i, j) += centred[i] * centred[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= static_cast<double>(n - 1);
      cov(j, i) = cov(i, j);
    }
  }
  if (mean_out) *mean_out = std::move(mean);
  return cov;
}

PcaModel fit_pca(const Matrix& X, std::size_t k_max) {
  if (X.rows() < 2) throw Error(Errc::degenerate_input, "PCA needs at least 2 rows");
  const std::size_t d = X.cols();
  if (k_max == 0 || k_max > d) k_max = d;

  PcaModel m;
  const Matrix cov = covariance(X, &m.mean);
  const SymmetricEigen eig = symmetric_eigen(cov);

  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);

  m.components = Matrix(k_max, d);
  for (std::size_t k = 0; k < k_max; ++k) {
    const std::size_t col = d - 1 - k;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i) {
      if (std::abs(eig.vectors(i, col)) > std::abs(eig.vectors(arg, col))) arg = i;
    }
    const double sign = eig.vectors(arg, col) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < d; ++i) m.components(k, i) = sign * eig.vectors(i, col);
    const double lambda = std::max(eig.values[col], 0.0);
    m.eigenvalues.push_back(lambda);
    m.explained_variance_ratio.push_back(total > 0.0 ? lambda / total : 0.0);
  }
  m.fitted = true;
  return m;
}

Matrix transform(const PcaModel& model, const Matrix& X, std::size_t k) {
  if (!model.fitted) throw Error(Errc::not_fitted, "PCA model used before fit");
  if (k < 1 || k > model.k_max()) throw Error(Errc::bad_k, "k must be in [1, k_max]");
  if (X.cols() != model.dims()) throw Error(Errc::shape_mismatch, "PCA input width differs from fit");
  const std::size_t d = model.dims();
  Matrix Z(X.rows(), k);
  std::vector<double> centred(d);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) centred[c] = X(r, c) - model.mean[c];
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += centred[c] * model.components(j, c);
      Z(r, j) = acc;
    }
  }
  return Z;
}

Matrix inverse_transform(const PcaModel& model, const Matrix& Z) {
  if (!model.fitted) throw Error(Errc::not_fitted, "PCA model used before fit");
  const std::size_t k = Z.cols();
  if (k < 1 || k > model.k_max()) throw Error(Errc::bad_k, "k must be in [1, k_max]");
  const std::size_t d = model.dims();
  Matrix X(Z.rows(), d);
  for (std::size_t r = 0; r < Z.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      double acc = model.mean[c];
      for (std::size_t j = 0; j < k; ++j) acc += Z(r, j) * model.components(j, c);
      X(r, c) = acc;
    }
  }
  return X;
}

const std::vector<double>& explained_variance_ratio(const PcaModel& model) {
  if (!model.fitted) throw Error(Errc::not_fitted, "PCA model used before fit");
  return model.explained_variance_ratio;
}

std::string to_json(const PcaModel& model) {
  nlohmann::json j;
  j["mean"] = model.mean;
  j["k_max"] = model.k_max();
  j["components"] = model.components.data();
  j["eigenvalues"] = model.eigenvalues;
  j["explained_variance_ratio"] = model.explained_variance_ratio;
  return j.dump(2);
}

PcaModel from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    PcaModel m;
    m.mean = j.at("mean").get<std::vector<double>>();
    const auto k = j.at("k_max").get<std::size_t>();
    m.components = Matrix(k, m.mean.size(), j.at("components").get<std::vector<double>>());
    m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    m.explained_variance_ratio = j.at("explained_variance_ratio").get<std::vector<double>>();
    m.fitted = true;
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_file, std::string("PCA JSON: ") + e.what());
  }
}

}  // namespace emgait::pca
