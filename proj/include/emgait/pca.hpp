#pragma once

#include <string>
#include <vector>

#include "emgait/matrix.hpp"

namespace emgait::pca {

struct PcaModel {
  std::vector<double> mean;
  /// k_max x d, orthonormal rows, eigenvalue-descending. The largest-magnitude
  /// element of each row is positive.
  Matrix components;
  std::vector<double> eigenvalues;
  std::vector<double> explained_variance_ratio;
  bool fitted = false;

  std::size_t k_max() const noexcept { return components.rows(); }
  std::size_t dims() const noexcept { return mean.size(); }
};

/// Eigenvalues (ascending) and eigenvectors (columns of `vectors`) of a
/// symmetric matrix by Householder tridiagonalization and implicit QL.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};
SymmetricEigen symmetric_eigen(const Matrix& a);

/// Sample covariance (1 / (N - 1)) of the rows of X.
Matrix covariance(const Matrix& X, std::vector<double>* mean_out = nullptr);

/// Throws DegenerateInput for fewer than 2 rows. k_max = 0 keeps all d components.
PcaModel fit_pca(const Matrix& X, std::size_t k_max = 0);

/// (X - mean) * components[:k]^T. Throws BadK unless 1 <= k <= k_max, NotFitted.
Matrix transform(const PcaModel& model, const Matrix& X, std::size_t k);
/// Z * components[:k] + mean, k = Z.cols().
Matrix inverse_transform(const PcaModel& model, const Matrix& Z);
const std::vector<double>& explained_variance_ratio(const PcaModel& model);

std::string to_json(const PcaModel& model);
PcaModel from_json(const std::string& text);

}  // namespace emgait::pca
