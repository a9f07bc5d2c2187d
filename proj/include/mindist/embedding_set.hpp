#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>

#include "mindist/error.hpp"

namespace mindist {

enum class FileFormat { binary, csv };

/// A set of n embedding vectors in dimension d, optionally weighted.
/// Represents the empirical distribution the metrics operate on.
/// Immutable after construction and safe to share across threads.
///
/// Invariants enforced at construction:
///   - every entry finite
///   - n >= 1, d >= 1
///   - weights (if present) nonnegative and summing to 1 within 1e-9
class EmbeddingSet {
public:
  explicit EmbeddingSet(Eigen::MatrixXd data);
  EmbeddingSet(Eigen::MatrixXd data, Eigen::VectorXd weights);

  Eigen::Index n() const noexcept { return data_.rows(); }
  Eigen::Index d() const noexcept { return data_.cols(); }
  const Eigen::MatrixXd& data() const noexcept { return data_; }

  bool weighted() const noexcept { return weights_.has_value(); }
  /// Valid only when weighted().
  const Eigen::VectorXd& weights() const { return *weights_; }
  /// Weight of row i; 1/n when unweighted.
  double weight(Eigen::Index i) const {
    return weights_ ? (*weights_)(i) : 1.0 / static_cast<double>(n());
  }

private:
  void validate() const;

  Eigen::MatrixXd data_;
  std::optional<Eigen::VectorXd> weights_;
};

/// Reads an embedding file. With `format` unset the format is detected from
/// the leading magic bytes (binary) falling back to CSV.
EmbeddingSet load_embeddings(const std::string& path,
                             std::optional<FileFormat> format = std::nullopt);

/// Writes an embedding file. Binary files round-trip bit-exactly; CSV uses
/// shortest round-trip decimal representation.
void save_embeddings(const EmbeddingSet& set, const std::string& path,
                     FileFormat format = FileFormat::binary);

/// Draws m rows uniformly without replacement. Deterministic in (set, m, seed);
/// rejects weighted inputs.
EmbeddingSet subsample(const EmbeddingSet& set, Eigen::Index m, std::uint64_t seed);

/// Draws m rows with round(epsilon*m) rows from `b` (ties rounded half-up)
/// and the rest from `a`, then shuffles. Both sets must be unweighted and of
/// equal dimension.
EmbeddingSet mix(const EmbeddingSet& a, const EmbeddingSet& b, double epsilon,
                 Eigen::Index m, std::uint64_t seed);

}  // namespace mindist
