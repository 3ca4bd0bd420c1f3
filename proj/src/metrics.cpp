#include "promptsearch/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace promptsearch {

EmbeddingSet EmbeddingSet::from_samples(
    const std::vector<SemanticVector>& samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("embedding set needs at least 2 samples");
  const Eigen::Index dim = samples.front().size();
  for (const auto& s : samples)
    if (s.size() != dim)
      throw std::invalid_argument("embedding set dimension mismatch");

  Eigen::MatrixXd data(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i)
    data.row(static_cast<Eigen::Index>(i)) = samples[i].transpose();

  EmbeddingSet set;
  set.sample_count = samples.size();
  set.mean = data.colwise().mean().transpose();
  Eigen::MatrixXd centered = data.rowwise() - set.mean.transpose();
  set.covariance = centered.transpose() * centered /
                   static_cast<double>(samples.size() - 1);
  set.covariance = (set.covariance + set.covariance.transpose()) / 2.0;
  return set;
}

double bypass_rate(const std::vector<AttackOutcome>& outcomes, double delta) {
  if (outcomes.empty())
    throw std::invalid_argument("bypass_rate: no outcomes");
  std::size_t successes = 0;
  for (const auto& o : outcomes)
    if (o.success && o.best_reward >= delta) ++successes;
  return static_cast<double>(successes) / static_cast<double>(outcomes.size());
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("matrix_sqrt_psd: matrix must be square");
  double scale = 1.0 + m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument("matrix_sqrt_psd: matrix must be symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success)
    throw std::invalid_argument("matrix_sqrt_psd: eigendecomposition failed");
  Eigen::VectorXd eigenvalues = solver.eigenvalues();
  if (eigenvalues.minCoeff() < -1e-10)
    throw std::invalid_argument(
        "matrix_sqrt_psd: matrix is indefinite beyond tolerance");
  Eigen::VectorXd roots = eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() *
         solver.eigenvectors().transpose();
}

double frechet_distance(const EmbeddingSet& x, const EmbeddingSet& y) {
  if (x.mean.size() != y.mean.size())
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  Eigen::MatrixXd sqrt_x = matrix_sqrt_psd(x.covariance);
  Eigen::MatrixXd inner = sqrt_x * y.covariance * sqrt_x;
  inner = (inner + inner.transpose()) / 2.0;
  Eigen::MatrixXd cross = matrix_sqrt_psd(inner);

  double mean_term = (x.mean - y.mean).squaredNorm();
  double trace_term =
      x.covariance.trace() + y.covariance.trace() - 2.0 * cross.trace();
  double d = mean_term + trace_term;
  return d < 0.0 ? 0.0 : d;
}

}  // namespace promptsearch
