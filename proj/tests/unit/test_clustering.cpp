#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rode/clustering.hpp"
#include "rode/error.hpp"
#include "support.hpp"

using namespace rode;

TEST_CASE("two triples on separate rays form two clusters") {
  const double values[] = {0.0, 0.1, 0.2, 10.0, 10.1, 10.2};
  Matrix x;
  for (double v : values) {
    const double angle = 0.1 * v;
    const double row[] = {std::cos(angle), std::sin(angle)};
    x.append_row(row);
  }
  const DbscanConfig config{0.001, 3};
  const ClusterAssignment a = dbscan(x, config);
  CHECK(a.cluster_count == 2);
  CHECK(a.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
  CHECK(a.labels == testing::reference_dbscan(x, config.eps, config.min_pts));
}

TEST_CASE("a lone point with min_pts 2 is noise") {
  Matrix x(1, 3, 1.0);
  const ClusterAssignment a = dbscan(x, {0.5, 2});
  CHECK(a.cluster_count == 0);
  CHECK(a.labels == std::vector<int>{kNoise});
  CHECK(a.noise_count() == 1);
}

TEST_CASE("identical points form one cluster") {
  Matrix x(7, 4, 0.5);
  for (int min_pts : {1, 4, 7}) {
    const ClusterAssignment a = dbscan(x, {0.01, min_pts});
    CHECK(a.cluster_count == 1);
    CHECK(a.noise_count() == 0);
  }
}

TEST_CASE("eps is inclusive") {
  // Two unit vectors at cosine distance exactly 0.5.
  Matrix x;
  const double r0[] = {1.0, 0.0};
  const double r1[] = {0.5, std::sqrt(3.0) / 2.0};
  x.append_row(r0);
  x.append_row(r1);
  const double d = 1.0 - testing::cosine(x.row(0), x.row(1));
  CHECK(dbscan(x, {d, 2}).cluster_count == 1);
  CHECK(dbscan(x, {d * (1.0 - 1e-9), 2}).cluster_count == 0);
}

TEST_CASE("dbscan input validation") {
  Matrix zero(2, 3);
  CHECK_THROWS_AS(dbscan(zero, {0.5, 1}), Error);
  CHECK_THROWS_AS(dbscan(Matrix{}, {0.5, 1}), Error);
  Matrix ok(2, 3, 1.0);
  CHECK_THROWS_AS(dbscan(ok, {0.0, 1}), Error);
  CHECK_THROWS_AS(dbscan(ok, {0.5, 0}), Error);
}

TEST_CASE("dbscan agrees with the connected-component reference") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> n_dist(5, 120), k_dist(1, 6), pts(1, 6);
  std::uniform_real_distribution<double> eps_dist(0.02, 0.4);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = k_dist(rng);
    const std::size_t n = static_cast<std::size_t>(n_dist(rng));
    const Matrix centers = testing::gaussian_matrix(static_cast<std::size_t>(k), 6, rng);
    Matrix x(n, 6);
    std::normal_distribution<double> jitter(0.0, 0.3);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < 6; ++d) x(i, d) = centers(i % k, d) + jitter(rng);
    const double eps = eps_dist(rng);
    const int min_pts = pts(rng);
    const ClusterAssignment a = dbscan(x, {eps, min_pts});
    const auto ref = testing::reference_dbscan(x, eps, min_pts);
    REQUIRE(a.labels == ref);
    CHECK(a.cluster_count == (ref.empty() ? 0 : *std::max_element(ref.begin(), ref.end()) + 1));
  }
}

TEST_CASE("the partition does not depend on row order") {
  std::mt19937_64 rng(5);
  const Matrix centers = testing::gaussian_matrix(4, 5, rng);
  Matrix x(60, 5);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t d = 0; d < 5; ++d) x(i, d) = centers(i % 4, d) + jitter(rng);
  const ClusterAssignment base = dbscan(x, {0.05, 3});
  REQUIRE(base.noise_count() == 0);  // core-only partition is order independent

  std::vector<std::size_t> perm(60);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix y(60, 5);
  for (std::size_t i = 0; i < 60; ++i)
    std::copy(x.row(perm[i]).begin(), x.row(perm[i]).end(), y.row(i).begin());
  const ClusterAssignment shuffled = dbscan(y, {0.05, 3});
  CHECK(shuffled.cluster_count == base.cluster_count);
  // Same-cluster relation is preserved.
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 60; ++j)
      CHECK((shuffled.labels[i] == shuffled.labels[j]) ==
            (base.labels[perm[i]] == base.labels[perm[j]]));
}

TEST_CASE("cluster centers are member means") {
  Matrix x;
  const double a[] = {1.0, 0.0};
  const double b[] = {0.0, 1.0};
  x.append_row(a);
  x.append_row(b);
  ClusterAssignment two{{0, 0}, 1};
  const Matrix c = cluster_centers(x, two);
  CHECK(c(0, 0) == 0.5);
  CHECK(c(0, 1) == 0.5);

  ClusterAssignment singletons{{1, 0}, 2};
  const Matrix s = cluster_centers(x, singletons);
  CHECK(s(0, 1) == 1.0);
  CHECK(s(1, 0) == 1.0);
}

TEST_CASE("noise rows do not move the centers") {
  std::mt19937_64 rng(8);
  const Matrix x = testing::gaussian_matrix(12, 3, rng);
  ClusterAssignment with_noise{{0, 1, kNoise, 0, 1, kNoise, 0, 0, 1, kNoise, 1, 0}, 2};
  Matrix kept;
  ClusterAssignment clean;
  clean.cluster_count = 2;
  for (std::size_t i = 0; i < 12; ++i)
    if (with_noise.labels[i] != kNoise) {
      kept.append_row(x.row(i));
      clean.labels.push_back(with_noise.labels[i]);
    }
  CHECK(cluster_centers(x, with_noise) == cluster_centers(kept, clean));
}

TEST_CASE("cluster_centers rejects inconsistent input") {
  Matrix x(2, 2, 1.0);
  CHECK_THROWS_AS(cluster_centers(x, {{0, 2}, 2}), Error);
  CHECK_THROWS_AS(cluster_centers(x, {{0, 0}, 2}), Error);  // empty cluster 1
  CHECK_THROWS_AS(cluster_centers(x, {{0}, 1}), Error);
}
