#include "rode/matrix.hpp"

#include <cmath>

namespace rode {

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool all_finite(std::span<const double> a) {
  for (double x : a)
    if (!std::isfinite(x)) return false;
  return true;
}

double normalize_in_place(std::span<double> v) {
  const double n = norm(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return n;
}

}  // namespace rode
