#pragma once

#include <vector>

#include "rode/matrix.hpp"

namespace rode {

inline constexpr int kNoise = -1;

struct DbscanConfig {
  double eps = 0.6;  // cosine-distance radius, inclusive
  int min_pts = 4;   // neighborhood size including the point itself
};

struct ClusterAssignment {
  std::vector<int> labels;  // cluster id in [0, cluster_count) or kNoise
  int cluster_count = 0;

  std::size_t noise_count() const;
};

// DBSCAN over cosine distance. Points are visited in index order; clusters are
// numbered in order of their lowest-index core point, and a border point joins
// the first cluster that reaches it. Throws on a zero-norm row.
ClusterAssignment dbscan(const Matrix& features, const DbscanConfig& config);

// Row k is the mean of the rows labelled k; noise rows are ignored.
Matrix cluster_centers(const Matrix& features, const ClusterAssignment& assignment);

}  // namespace rode
