#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowcast/tensor.hpp"

namespace flowcast {

/// Principal components of a training embedding matrix, retained up to a
/// cumulative explained-variance target. Components are stored as rows
/// [d_reduced x d_input], orthonormal, sorted by descending variance, each
/// sign-fixed so its largest-magnitude coordinate is positive (fit is then
/// bit-reproducible for identical input).
struct PCAModel {
  std::vector<double> mean;                     // [d_input]
  Tensor components;                            // [d_reduced x d_input]
  std::vector<double> explained_variance_ratio; // [d_reduced]
  int64_t d_input = 0;
  int64_t d_reduced = 0;
  double variance_target = 0.95;
  bool zero_variance_warning = false;

  std::vector<double> transform(const std::vector<double>& v) const;

  std::string to_json() const;
  static PCAModel from_json(const std::string& json_text);
  void save(const std::string& path) const;
  static PCAModel load(const std::string& path);
};

/// Covariance uses 1/(m-1) normalization; eigen-decomposition is a cyclic
/// Jacobi sweep (deterministic). d_reduced is the smallest k whose cumulative
/// explained variance reaches variance_target; directions with numerically
/// zero variance are never retained, so a target of 1.0 keeps exactly the
/// rank of the centered matrix. A zero-variance input keeps one component
/// and sets zero_variance_warning.
PCAModel fit_pca(const Tensor& embeddings /* [m x d] */, double variance_target = 0.95);

/// Symmetric eigen-decomposition helper (exposed for reuse and testing):
/// ascending eigenvalues, matching eigenvector columns.
void jacobi_eigh(const Tensor& sym /* [d x d] */, std::vector<double>& eigenvalues,
                 Tensor& eigenvectors /* [d x d], column k = vector k */);

}  // namespace flowcast
