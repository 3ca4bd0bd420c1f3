#pragma once

#include <Eigen/Dense>
#include <vector>

#include "promptsearch/attack.hpp"
#include "promptsearch/embedding.hpp"

namespace promptsearch {

// Gaussian fit of a sample of embeddings: mean and unbiased covariance.
struct EmbeddingSet {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t sample_count = 0;

  // Needs at least two samples of equal dimension.
  static EmbeddingSet from_samples(const std::vector<SemanticVector>& samples);
};

// Fraction of outcomes that succeeded (bypassed with similarity >= delta).
double bypass_rate(const std::vector<AttackOutcome>& outcomes, double delta);

// Symmetric PSD square root via eigendecomposition. Eigenvalues below
// -1e-10 are rejected; small negatives are clipped to zero. The residual
// ||S*S - M||_F stays within 1e-8 * (1 + ||M||_F).
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m);

// ||mu_x - mu_y||^2 + Tr(Sx + Sy - 2 (Sx Sy)^(1/2)), with the product
// symmetrized as Sx^(1/2) Sy Sx^(1/2) before the root. Clipped at zero.
double frechet_distance(const EmbeddingSet& x, const EmbeddingSet& y);

}  // namespace promptsearch
