#include "rode/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rode::kernels {

namespace {

inline double row_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Matrix inner_products(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t m = b.rows();
  const std::size_t d = a.cols();
  Matrix out(a.rows(), m);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      po[i * m + j] = row_dot(pa + i * d, pb + j * d, d);
  return out;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  const auto n = static_cast<std::ptrdiff_t>(m.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) normalize_in_place(out.row(i));
  return out;
}

Matrix cosine_distances(const Matrix& unit_rows) {
  const auto n = static_cast<std::ptrdiff_t>(unit_rows.rows());
  const std::size_t d = unit_rows.cols();
  const auto un = static_cast<std::size_t>(n);
  Matrix out(un, un);
  const double* p = unit_rows.data().data();
  double* po = out.data().data();
  // Fill the upper triangle and mirror it, so d(i,j) == d(j,i) exactly.
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    po[i * un + i] = 0.0;
    for (std::size_t j = static_cast<std::size_t>(i) + 1; j < un; ++j) {
      const double v = 1.0 - row_dot(p + i * d, p + j * d, d);
      po[i * un + j] = v;
      po[j * un + i] = v;
    }
  }
  return out;
}

namespace serial {

Matrix inner_products(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.cols());
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      out(i, j) = row_dot(a.row(i).data(), b.row(j).data(), a.cols());
  return out;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) normalize_in_place(out.row(i));
  return out;
}

Matrix cosine_distances(const Matrix& unit_rows) {
  const std::size_t n = unit_rows.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 1.0 - row_dot(unit_rows.row(i).data(), unit_rows.row(j).data(),
                                     unit_rows.cols());
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

}  // namespace serial

}  // namespace rode::kernels
