#include "rode/ccm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rode/clustering.hpp"
#include "rode/error.hpp"
#include "rode/kernels.hpp"

namespace rode {

double Matching::round_one_cost() const {
  double total = 0.0;
  for (const auto& pair : pairs)
    if (pair.round == 1) total += pair.cost;
  return total;
}

bool Matching::covers_all() const {
  std::vector<bool> seen_p(size_p, false), seen_q(size_q, false);
  for (const auto& pair : pairs) {
    if (pair.p < size_p) seen_p[pair.p] = true;
    if (pair.q < size_q) seen_q[pair.q] = true;
  }
  return std::all_of(seen_p.begin(), seen_p.end(), [](bool b) { return b; }) &&
         std::all_of(seen_q.begin(), seen_q.end(), [](bool b) { return b; });
}

Matrix cost_matrix(const Matrix& centers_p, const Matrix& centers_q) {
  if (centers_p.cols() != centers_q.cols()) throw Error("cost_matrix: dimension mismatch");
  for (std::size_t i = 0; i < centers_p.rows(); ++i)
    if (!(norm(centers_p.row(i)) > 0.0))
      throw Error("cost_matrix: P center " + std::to_string(i) + " has zero norm");
  for (std::size_t j = 0; j < centers_q.rows(); ++j)
    if (!(norm(centers_q.row(j)) > 0.0))
      throw Error("cost_matrix: Q center " + std::to_string(j) + " has zero norm");
  Matrix cos = kernels::inner_products(kernels::normalize_rows(centers_p),
                                       kernels::normalize_rows(centers_q));
  for (double& c : cos.data()) c = std::exp(1.0 - std::clamp(c, -1.0, 1.0));
  return cos;
}

namespace {

// Shortest augmenting path Hungarian method with row/column potentials.
// On return row_of_col[j] is the row assigned to column j, and u, v are
// optimal duals: u[i] + v[j] <= c(i, j) with equality on assigned pairs.
struct HungarianResult {
  std::vector<std::size_t> col_of_row;
  std::vector<double> u, v;
};

HungarianResult hungarian(const Matrix& cost) {
  const std::size_t n = cost.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based internal arrays; index 0 is the virtual root column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  HungarianResult out;
  out.col_of_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.col_of_row[p[j] - 1] = j - 1;
  out.u.assign(u.begin() + 1, u.end());
  out.v.assign(v.begin() + 1, v.end());
  return out;
}

constexpr std::size_t kFree = std::numeric_limits<std::size_t>::max();

// Kuhn augmenting search over the tight-edge graph restricted to rows > `locked_upto`.
bool augment(std::size_t row, const std::vector<std::vector<bool>>& tight, std::size_t locked_upto,
             std::size_t banned_col, std::vector<std::size_t>& col_of_row,
             std::vector<std::size_t>& row_of_col, std::vector<bool>& visited) {
  const std::size_t n = tight.size();
  for (std::size_t c = 0; c < n; ++c) {
    if (!tight[row][c] || c == banned_col || visited[c]) continue;
    const std::size_t owner = row_of_col[c];
    if (owner != kFree && owner <= locked_upto) continue;
    visited[c] = true;
    if (owner == kFree ||
        augment(owner, tight, locked_upto, banned_col, col_of_row, row_of_col, visited)) {
      col_of_row[row] = c;
      row_of_col[c] = row;
      return true;
    }
  }
  return false;
}

}  // namespace

Matching linear_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols())
    throw Error("linear_assignment: cost matrix is " + std::to_string(cost.rows()) + "x" +
                std::to_string(cost.cols()) + ", expected square");
  if (!all_finite(cost.data())) throw Error("linear_assignment: non-finite cost");
  const std::size_t n = cost.rows();
  Matching out;
  out.size_p = out.size_q = n;
  out.rounds = n > 0 ? 1 : 0;
  if (n == 0) return out;

  HungarianResult h = hungarian(cost);

  // Every optimal assignment is a perfect matching of the tight edges.
  double scale = 1.0;
  for (double c : cost.data()) scale = std::max(scale, std::abs(c));
  const double tol = 1e-9 * scale * double(n);
  std::vector<std::vector<bool>> tight(n, std::vector<bool>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      tight[i][j] = std::abs(cost(i, j) - h.u[i] - h.v[j]) <= tol;

  std::vector<std::size_t>& col_of_row = h.col_of_row;
  std::vector<std::size_t> row_of_col(n);
  for (std::size_t i = 0; i < n; ++i) {
    tight[i][col_of_row[i]] = true;
    row_of_col[col_of_row[i]] = i;
  }

  // Fix rows in order, each to the smallest column that still admits a
  // perfect tight matching of the remaining rows.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!tight[i][j]) continue;
      if (col_of_row[i] == j) break;
      const std::size_t displaced = row_of_col[j];
      if (displaced < i) continue;  // column owned by a fixed row
      const std::size_t freed = col_of_row[i];
      auto saved_rows = col_of_row;
      auto saved_cols = row_of_col;
      col_of_row[i] = j;
      row_of_col[j] = i;
      row_of_col[freed] = kFree;
      col_of_row[displaced] = kFree;
      std::vector<bool> visited(n, false);
      if (augment(displaced, tight, i, j, col_of_row, row_of_col, visited)) break;
      col_of_row = std::move(saved_rows);
      row_of_col = std::move(saved_cols);
    }
  }

  for (std::size_t i = 0; i < n; ++i)
    out.pairs.push_back({i, col_of_row[i], 1, cost(i, col_of_row[i])});
  return out;
}

Matching match_clusters(const Matrix& centers_p, const Matrix& centers_q) {
  if (centers_p.rows() == 0 || centers_q.rows() == 0)
    throw Error("match_clusters: both sides need at least one cluster");
  const Matrix cost = cost_matrix(centers_p, centers_q);
  const std::size_t np = cost.rows();
  const std::size_t nq = cost.cols();
  const std::size_t n = std::max(np, nq);

  Matrix padded(n, n, kPadCost);
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < nq; ++j) padded(i, j) = cost(i, j);
  const Matching square = linear_assignment(padded);

  Matching out;
  out.size_p = np;
  out.size_q = nq;
  out.rounds = 1;
  std::vector<bool> matched_p(np, false), matched_q(nq, false);
  for (const auto& pair : square.pairs) {
    if (pair.p >= np || pair.q >= nq) continue;
    out.pairs.push_back({pair.p, pair.q, 1, cost(pair.p, pair.q)});
    matched_p[pair.p] = true;
    matched_q[pair.q] = true;
  }

  if (np > nq) {
    for (std::size_t i = 0; i < np; ++i) {
      if (matched_p[i]) continue;
      std::size_t best = 0;
      for (std::size_t j = 1; j < nq; ++j)
        if (cost(i, j) < cost(i, best)) best = j;
      out.pairs.push_back({i, best, 2, cost(i, best)});
      out.rounds = 2;
    }
  } else if (nq > np) {
    for (std::size_t j = 0; j < nq; ++j) {
      if (matched_q[j]) continue;
      std::size_t best = 0;
      for (std::size_t i = 1; i < np; ++i)
        if (cost(i, j) < cost(best, j)) best = i;
      out.pairs.push_back({best, j, 2, cost(best, j)});
      out.rounds = 2;
    }
  }
  std::stable_sort(out.pairs.begin(), out.pairs.end(), [](const auto& a, const auto& b) {
    if (a.round != b.round) return a.round < b.round;
    if (a.p != b.p) return a.p < b.p;
    return a.q < b.q;
  });
  return out;
}

std::vector<int> label_map(const Matching& matching, Direction direction) {
  const bool forward = direction == Direction::PToQ;
  const std::size_t n_src = forward ? matching.size_p : matching.size_q;
  std::vector<int> map(n_src, -1);
  std::vector<int> best_round(n_src, std::numeric_limits<int>::max());
  for (const auto& pair : matching.pairs) {
    const std::size_t src = forward ? pair.p : pair.q;
    const std::size_t dst = forward ? pair.q : pair.p;
    if (src >= n_src) continue;
    if (pair.round < best_round[src]) {
      best_round[src] = pair.round;
      map[src] = static_cast<int>(dst);
    }
  }
  return map;
}

std::vector<int> relabel(std::span<const int> labels, std::span<const int> map) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int label = labels[i];
    if (label == kNoise) {
      out[i] = kNoise;
      continue;
    }
    if (label < 0 || static_cast<std::size_t>(label) >= map.size())
      throw Error("relabel: label " + std::to_string(label) + " at position " + std::to_string(i) +
                  " is outside the matched index space");
    if (map[static_cast<std::size_t>(label)] < 0)
      throw Error("relabel: cluster " + std::to_string(label) + " is not covered by the matching");
    out[i] = map[static_cast<std::size_t>(label)];
  }
  return out;
}

std::vector<int> relabel(std::span<const int> labels, const Matching& matching,
                         Direction direction) {
  const auto map = label_map(matching, direction);
  return relabel(labels, map);
}

}  // namespace rode
