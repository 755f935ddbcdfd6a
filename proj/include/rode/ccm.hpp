#pragma once

#include <span>
#include <vector>

#include "rode/matrix.hpp"

namespace rode {

// Cluster consistency matching between two sets of cluster centers, P and Q.

struct MatchedPair {
  std::size_t p = 0;
  std::size_t q = 0;
  int round = 1;
  double cost = 0.0;

  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

struct Matching {
  std::size_t size_p = 0;
  std::size_t size_q = 0;
  std::vector<MatchedPair> pairs;  // round-1 pairs first, each round ordered by p then q
  int rounds = 0;

  double round_one_cost() const;
  // True when every cluster on both sides appears in at least one pair.
  bool covers_all() const;

  friend bool operator==(const Matching&, const Matching&) = default;
};

// Padding cost for rectangular problems; strictly above the largest possible
// exp-cosine cost e^2.
inline constexpr double kPadCost = 10.0;

// S_ij = exp(1 - cos(c_i, c_j)). Throws on a zero-norm center.
Matrix cost_matrix(const Matrix& centers_p, const Matrix& centers_q);

// Minimum-cost perfect matching on a square cost matrix. Among optimal
// assignments the one whose column sequence (ordered by row) is
// lexicographically smallest is returned. Pairs are ordered by row.
Matching linear_assignment(const Matrix& cost);

// Full matching: one-to-one assignment on the padded square problem, then every
// cluster of the larger side that is still unmatched is paired with its
// cheapest counterpart on the smaller side.
Matching match_clusters(const Matrix& centers_p, const Matrix& centers_q);

enum class Direction { PToQ, QToP };

// For each source cluster, the id of its counterpart on the other side. A
// round-1 partner wins; otherwise the later-round partner is used.
std::vector<int> label_map(const Matching& matching, Direction direction);

// Maps every non-noise label through `label_map`. Noise labels pass through.
// Throws if a label is outside the source index space.
std::vector<int> relabel(std::span<const int> labels, const Matching& matching,
                         Direction direction);
std::vector<int> relabel(std::span<const int> labels, std::span<const int> map);

}  // namespace rode
