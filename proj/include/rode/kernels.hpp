#pragma once

#include "rode/matrix.hpp"

// Data-parallel kernels shared by clustering, matching, and retrieval.
// The default implementations use OpenMP when available; `serial` holds the
// single-threaded reference versions the tests compare against. Each output
// element is computed by exactly one thread with a fixed summation order, so
// both variants are bit-identical.
namespace rode::kernels {

// out(i, j) = <a_i, b_j>. a and b must have equal column counts.
Matrix inner_products(const Matrix& a, const Matrix& b);

// Row-wise L2 normalization. Zero rows are left as zero.
Matrix normalize_rows(const Matrix& m);

// Cosine distance 1 - cos(a_i, a_j) for every pair of rows of `unit_rows`,
// which must already be L2-normalized.
Matrix cosine_distances(const Matrix& unit_rows);

int max_threads();

namespace serial {
Matrix inner_products(const Matrix& a, const Matrix& b);
Matrix normalize_rows(const Matrix& m);
Matrix cosine_distances(const Matrix& unit_rows);
}  // namespace serial

}  // namespace rode::kernels
