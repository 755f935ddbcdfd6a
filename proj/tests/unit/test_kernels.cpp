#include <doctest.h>

#include <random>

#include "rode/kernels.hpp"
#include "support.hpp"

using namespace rode;

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  std::mt19937_64 rng(7);
  for (std::size_t rows : {1u, 3u, 64u, 257u}) {
    const Matrix a = testing::gaussian_matrix(rows, 13, rng);
    const Matrix b = testing::gaussian_matrix(rows + 5, 13, rng);
    CHECK(kernels::inner_products(a, b) == kernels::serial::inner_products(a, b));
    const Matrix na = kernels::normalize_rows(a);
    CHECK(na == kernels::serial::normalize_rows(a));
    CHECK(kernels::cosine_distances(na) == kernels::serial::cosine_distances(na));
  }
}

TEST_CASE("inner products match a direct sum") {
  std::mt19937_64 rng(3);
  const Matrix a = testing::gaussian_matrix(4, 5, rng);
  const Matrix b = testing::gaussian_matrix(6, 5, rng);
  const Matrix ip = kernels::inner_products(a, b);
  REQUIRE(ip.rows() == 4);
  REQUIRE(ip.cols() == 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) s += a(i, k) * b(j, k);
      CHECK(ip(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("normalize_rows leaves zero rows at zero") {
  Matrix m(2, 3);
  m(1, 0) = 3.0;
  m(1, 2) = 4.0;
  const Matrix n = kernels::normalize_rows(m);
  CHECK(n(0, 0) == 0.0);
  CHECK(n(1, 0) == doctest::Approx(0.6));
  CHECK(n(1, 2) == doctest::Approx(0.8));
}

TEST_CASE("cosine distances are symmetric with a zero diagonal") {
  std::mt19937_64 rng(11);
  const Matrix u = testing::unit_rows(testing::gaussian_matrix(20, 8, rng));
  const Matrix d = kernels::cosine_distances(u);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(d(i, i) == doctest::Approx(0.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 20; ++j) {
      CHECK(d(i, j) == d(j, i));
      CHECK(d(i, j) == doctest::Approx(1.0 - testing::cosine(u.row(i), u.row(j))));
    }
  }
}
