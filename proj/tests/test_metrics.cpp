#include <cmath>

#include "doctest.h"
#include "promptsearch/metrics.hpp"
#include "promptsearch/rng.hpp"

using namespace promptsearch;

namespace {

std::vector<SemanticVector> gaussian_cloud(int n, int dim, std::uint64_t seed,
                                           double mean_shift = 0.0) {
  GaussianStream g(seed);
  std::vector<SemanticVector> out;
  for (int i = 0; i < n; ++i) {
    SemanticVector v(dim);
    for (int k = 0; k < dim; ++k) v[k] = g.next() + mean_shift;
    out.push_back(std::move(v));
  }
  return out;
}

Eigen::MatrixXd random_psd(int dim, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd b(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) b(i, j) = rng.next_symmetric();
  return b.transpose() * b;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("matrix square root basics") {
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
  CHECK((matrix_sqrt_psd(eye) - eye).cwiseAbs().maxCoeff() <= 1e-12);

  Eigen::MatrixXd d = Eigen::Vector2d(4.0, 9.0).asDiagonal();
  Eigen::MatrixXd s = matrix_sqrt_psd(d);
  CHECK(s(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(s(0, 1)) <= 1e-12);
}

TEST_CASE("matrix square root residual on a seeded PSD matrix") {
  Eigen::MatrixXd a = random_psd(5, 42);
  Eigen::MatrixXd s = matrix_sqrt_psd(a);
  CHECK((s * s - a).norm() <= 1e-8 * (1.0 + a.norm()));
}

TEST_CASE("matrix square root residual bound over 100 random matrices") {
  for (int i = 0; i < 100; ++i) {
    int dim = 2 + i % 15;  // up to 16x16
    Eigen::MatrixXd m = random_psd(dim, 1000 + i);
    Eigen::MatrixXd s = matrix_sqrt_psd(m);
    CHECK((s * s - m).norm() <= 1e-8 * (1.0 + m.norm()));
  }
}

TEST_CASE("matrix square root rejects bad input") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 2.0, 0.0, 1.0;
  CHECK_THROWS_AS(matrix_sqrt_psd(asym), std::invalid_argument);

  Eigen::MatrixXd indef = Eigen::Vector2d(1.0, -0.5).asDiagonal();
  CHECK_THROWS_AS(matrix_sqrt_psd(indef), std::invalid_argument);

  Eigen::MatrixXd rect(2, 3);
  rect.setZero();
  CHECK_THROWS_AS(matrix_sqrt_psd(rect), std::invalid_argument);
}

TEST_CASE("embedding set fitting") {
  CHECK_THROWS_AS(EmbeddingSet::from_samples({SemanticVector::Zero(3)}),
                  std::invalid_argument);
  std::vector<SemanticVector> mixed = {SemanticVector::Zero(3),
                                       SemanticVector::Zero(4)};
  CHECK_THROWS_AS(EmbeddingSet::from_samples(mixed), std::invalid_argument);

  EmbeddingSet set = EmbeddingSet::from_samples(gaussian_cloud(50, 6, 3));
  CHECK((set.covariance - set.covariance.transpose()).cwiseAbs().maxCoeff() <=
        1e-12);
  CHECK(set.sample_count == 50);
}

TEST_CASE("frechet distance identities") {
  EmbeddingSet x = EmbeddingSet::from_samples(gaussian_cloud(60, 8, 7));
  EmbeddingSet y = EmbeddingSet::from_samples(gaussian_cloud(60, 8, 8, 0.5));
  CHECK(frechet_distance(x, x) <= 1e-8);
  CHECK(std::abs(frechet_distance(x, y) - frechet_distance(y, x)) <= 1e-8);
  CHECK(frechet_distance(x, y) > 0.0);
}

TEST_CASE("one-dimensional closed form on fitted moments") {
  auto xs = gaussian_cloud(400, 1, 11, 0.0);
  auto ys = gaussian_cloud(400, 1, 12, 1.0);
  EmbeddingSet x = EmbeddingSet::from_samples(xs);
  EmbeddingSet y = EmbeddingSet::from_samples(ys);

  // Independent fit of the same moments.
  auto fit = [](const std::vector<SemanticVector>& s) {
    double mean = 0.0;
    for (const auto& v : s) mean += v[0];
    mean /= static_cast<double>(s.size());
    double var = 0.0;
    for (const auto& v : s) var += (v[0] - mean) * (v[0] - mean);
    var /= static_cast<double>(s.size() - 1);
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  auto [m1, s1] = fit(xs);
  auto [m2, s2] = fit(ys);
  double closed_form = (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
  CHECK(frechet_distance(x, y) == doctest::Approx(closed_form).epsilon(1e-6));
}

TEST_CASE("translation shifts the distance by its squared norm") {
  auto xs = gaussian_cloud(80, 5, 21);
  SemanticVector t(5);
  t << 0.3, -0.2, 0.5, 0.0, 1.0;
  std::vector<SemanticVector> ys;
  for (const auto& v : xs) ys.push_back(v + t);
  EmbeddingSet x = EmbeddingSet::from_samples(xs);
  EmbeddingSet y = EmbeddingSet::from_samples(ys);
  CHECK(std::abs(frechet_distance(x, y) - t.squaredNorm()) <= 1e-6);
}

TEST_CASE("dimension mismatch is rejected") {
  EmbeddingSet x = EmbeddingSet::from_samples(gaussian_cloud(10, 3, 1));
  EmbeddingSet y = EmbeddingSet::from_samples(gaussian_cloud(10, 4, 2));
  CHECK_THROWS_AS(frechet_distance(x, y), std::invalid_argument);
}

TEST_CASE("bypass rate arithmetic") {
  std::vector<AttackOutcome> outcomes;
  CHECK_THROWS_AS(bypass_rate(outcomes, 0.5), std::invalid_argument);

  for (int i = 0; i < 20; ++i) {
    AttackOutcome o;
    o.success = i < 13;
    o.best_reward = o.success ? 0.9 : 0.2;
    outcomes.push_back(o);
  }
  CHECK(bypass_rate(outcomes, 0.5) == 0.65);

  for (auto& o : outcomes) {
    o.success = true;
    o.best_reward = 0.9;
  }
  CHECK(bypass_rate(outcomes, 0.5) == 1.0);
  for (auto& o : outcomes) o.success = false;
  CHECK(bypass_rate(outcomes, 0.5) == 0.0);
}

TEST_SUITE_END();
