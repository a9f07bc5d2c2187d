#include "mindist/linalg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mindist/error.hpp"

namespace mindist {

namespace {

// Fixed block widths for the deterministic parallel kernels. Blocks are a
// function of the problem size only, never of the thread count, so results
// are bitwise identical for any parallelism degree.
constexpr Eigen::Index kRowBlock = 2048;
constexpr Eigen::Index kColBlock = 256;

}  // namespace

GaussianSummary summarize(const EmbeddingSet& set) {
  const Eigen::Index n = set.n();
  const Eigen::Index d = set.d();
  if (!set.weighted() && n < 2) {
    throw InvalidArgument("summarize requires n >= 2 for unweighted sets, got n=" +
                          std::to_string(n));
  }

  const Eigen::MatrixXd& x = set.data();

  // Pass 1: weighted mean. Each column reduced independently in row order.
  Eigen::VectorXd mean(d);
  if (set.weighted()) {
    const Eigen::VectorXd& w = set.weights();
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < d; ++j) mean(j) = x.col(j).dot(w);
  } else {
    const double inv_n = 1.0 / static_cast<double>(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < d; ++j) mean(j) = x.col(j).sum() * inv_n;
  }

  // Pass 2: centered second moment, accumulated over fixed row blocks in
  // index order. Within a block the d x d update is split over fixed column
  // blocks, each owned by one thread.
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  const Eigen::Index ncol_blocks = (d + kColBlock - 1) / kColBlock;
  Eigen::MatrixXd centered(std::min(kRowBlock, n), d);
  for (Eigen::Index r0 = 0; r0 < n; r0 += kRowBlock) {
    const Eigen::Index rows = std::min(kRowBlock, n - r0);
    auto block = x.middleRows(r0, rows);
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < d; ++j) {
      centered.col(j).head(rows) = block.col(j).array() - mean(j);
      if (set.weighted()) {
        centered.col(j).head(rows).array() *=
            set.weights().segment(r0, rows).array().sqrt();
      }
    }
    auto c = centered.topRows(rows);
#pragma omp parallel for schedule(static)
    for (Eigen::Index cb = 0; cb < ncol_blocks; ++cb) {
      const Eigen::Index c0 = cb * kColBlock;
      const Eigen::Index cols = std::min(kColBlock, d - c0);
      cov.middleCols(c0, cols).noalias() += c.transpose() * c.middleCols(c0, cols);
    }
  }
  if (!set.weighted()) cov /= static_cast<double>(n);

  cov = ((cov + cov.transpose()) * 0.5).eval();
  if (!cov.allFinite() || !mean.allFinite()) {
    throw ComputeError("non-finite moment estimate");
  }
  return GaussianSummary{std::move(mean), std::move(cov), n};
}

EigenDecomposition symmetric_eigen(const Eigen::MatrixXd& s, std::optional<double> rank_tol) {
  if (s.rows() != s.cols()) {
    throw InvalidArgument("symmetric_eigen requires a square matrix, got " +
                          std::to_string(s.rows()) + "x" + std::to_string(s.cols()));
  }
  if (!s.allFinite()) throw ComputeError("symmetric_eigen: non-finite entries");

  const Eigen::Index d = s.rows();
  Eigen::MatrixXd sym = (s + s.transpose()) * 0.5;
  double tol = rank_tol ? *rank_tol : 1e-10 * std::max(sym.trace(), 0.0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw ComputeError("symmetric eigensolver failed");

  // Eigen returns ascending order; flip to descending.
  EigenDecomposition out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  out.rank = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    double& lambda = out.eigenvalues(i);
    if (lambda > -tol && lambda < 0.0) lambda = 0.0;
    if (lambda > tol) ++out.rank;
  }
  return out;
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& s) {
  auto eig = symmetric_eigen(s);
  Eigen::VectorXd root = eig.eigenvalues.array().max(0.0).sqrt();
  Eigen::MatrixXd result =
      eig.eigenvectors * root.asDiagonal() * eig.eigenvectors.transpose();
  return ((result + result.transpose()) * 0.5).eval();
}

double trace_sqrt_product(const Eigen::MatrixXd& sx, const Eigen::MatrixXd& sy) {
  if (sx.rows() != sy.rows() || sx.cols() != sy.cols()) {
    throw InvalidArgument("trace_sqrt_product: shape mismatch");
  }
  Eigen::MatrixXd root_y = sqrt_psd(sy);
  Eigen::MatrixXd sandwich = root_y * sx * root_y;
  auto eig = symmetric_eigen(sandwich);
  double total = 0.0;
  for (Eigen::Index i = eig.eigenvalues.size(); i-- > 0;) {
    total += std::sqrt(std::max(eig.eigenvalues(i), 0.0));
  }
  if (!std::isfinite(total)) throw ComputeError("trace_sqrt_product: non-finite result");
  return total;
}

}  // namespace mindist
