#pragma once

#include <Eigen/Core>
#include <optional>

#include "mindist/embedding_set.hpp"

namespace mindist {

/// First and second moments of an embedding set. Covariance uses population
/// (1/n, or plain weighted) normalization so that a distribution compared
/// with itself scores exactly zero under moment metrics.
struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::Index n_source = 0;
};

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
struct EigenDecomposition {
  Eigen::VectorXd eigenvalues;   // descending
  Eigen::MatrixXd eigenvectors;  // orthonormal columns, aligned with eigenvalues
  Eigen::Index rank = 0;         // count of eigenvalues > rank_tol
};

GaussianSummary summarize(const EmbeddingSet& set);

/// Symmetrizes S, decomposes, clamps eigenvalues in (-rank_tol, 0) to zero.
/// Default rank_tol is 1e-10 * max(trace(S), 0), a scale-invariant cutoff.
EigenDecomposition symmetric_eigen(const Eigen::MatrixXd& s,
                                   std::optional<double> rank_tol = std::nullopt);

/// Principal square root of a symmetric PSD matrix; negative eigenvalues
/// within tolerance are treated as zero.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& s);

/// tr((Sy^{1/2} Sx Sy^{1/2})^{1/2}), the cross term of the Gaussian
/// 2-Wasserstein distance, evaluated through symmetric eigensolves only.
double trace_sqrt_product(const Eigen::MatrixXd& sx, const Eigen::MatrixXd& sy);

}  // namespace mindist
