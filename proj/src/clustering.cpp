#include "rode/clustering.hpp"

#include <algorithm>
#include <deque>
#include <string>

#include "rode/error.hpp"
#include "rode/kernels.hpp"

namespace rode {

std::size_t ClusterAssignment::noise_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
}

ClusterAssignment dbscan(const Matrix& features, const DbscanConfig& config) {
  if (!(config.eps > 0.0)) throw Error("dbscan: eps must be > 0");
  if (config.min_pts < 1) throw Error("dbscan: min_pts must be >= 1");
  const std::size_t n = features.rows();
  if (n == 0) throw Error("dbscan: no points");
  for (std::size_t i = 0; i < n; ++i)
    if (!(norm(features.row(i)) > 0.0))
      throw Error("dbscan: row " + std::to_string(i) + " has zero norm");

  const Matrix dist = kernels::cosine_distances(kernels::normalize_rows(features));

  // Neighbor lists in ascending index order (self included).
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = dist.row(i);
    for (std::size_t j = 0; j < n; ++j)
      if (row[j] <= config.eps) neighbors[i].push_back(j);
  }
  const auto min_pts = static_cast<std::size_t>(config.min_pts);

  constexpr int kUnvisited = -2;
  ClusterAssignment out;
  out.labels.assign(n, kUnvisited);
  for (std::size_t i = 0; i < n; ++i) {
    if (out.labels[i] != kUnvisited) continue;
    if (neighbors[i].size() < min_pts) {
      out.labels[i] = kNoise;  // may become a border point later
      continue;
    }
    const int cluster = out.cluster_count++;
    out.labels[i] = cluster;
    std::deque<std::size_t> frontier(neighbors[i].begin(), neighbors[i].end());
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (out.labels[q] == kNoise) out.labels[q] = cluster;
      if (out.labels[q] != kUnvisited) continue;
      out.labels[q] = cluster;
      if (neighbors[q].size() >= min_pts)
        frontier.insert(frontier.end(), neighbors[q].begin(), neighbors[q].end());
    }
  }
  return out;
}

Matrix cluster_centers(const Matrix& features, const ClusterAssignment& assignment) {
  if (assignment.cluster_count <= 0) throw Error("cluster_centers: no clusters");
  if (assignment.labels.size() != features.rows())
    throw Error("cluster_centers: label count does not match feature rows");
  const auto k = static_cast<std::size_t>(assignment.cluster_count);
  Matrix centers(k, features.cols());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const int label = assignment.labels[i];
    if (label == kNoise) continue;
    if (label < 0 || label >= assignment.cluster_count)
      throw Error("cluster_centers: label out of range at row " + std::to_string(i));
    auto c = centers.row(static_cast<std::size_t>(label));
    const auto f = features.row(i);
    for (std::size_t d = 0; d < c.size(); ++d) c[d] += f[d];
    ++counts[static_cast<std::size_t>(label)];
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) throw Error("cluster_centers: cluster " + std::to_string(j) + " is empty");
    for (double& x : centers.row(j)) x /= double(counts[j]);
  }
  return centers;
}

}  // namespace rode
