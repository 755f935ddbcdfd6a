#pragma once

// Test-only helpers and independent reference implementations. Nothing here
// calls into the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rode/matrix.hpp"
#include "rode/objectives.hpp"

namespace testing {

inline rode::Matrix gaussian_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                    double sigma = 1.0) {
  std::normal_distribution<double> n(0.0, sigma);
  rode::Matrix m(rows, cols);
  for (double& v : m.data()) v = n(rng);
  return m;
}

inline rode::Matrix unit_rows(rode::Matrix m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double v : m.row(i)) s += v * v;
    s = std::sqrt(s);
    for (double& v : m.row(i)) v /= s;
  }
  return m;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / std::sqrt(aa * bb);
}

// DBSCAN by connected components: core points joined when within eps form the
// clusters, numbered by their lowest-index core point; a border point takes the
// lowest-numbered cluster among its core neighbors.
inline std::vector<int> reference_dbscan(const rode::Matrix& x, double eps, int min_pts) {
  const std::size_t n = x.rows();
  std::vector<std::vector<bool>> near(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) near[i][j] = 1.0 - cosine(x.row(i), x.row(j)) <= eps;
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i)
    core[i] = std::count(near[i].begin(), near[i].end(), true) >= min_pts;

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && near[i][j]) parent[find(i)] = find(j);

  std::vector<int> component_label(n, -1), labels(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (core[i]) {
      const std::size_t r = find(i);
      if (component_label[r] < 0) component_label[r] = next++;
      labels[i] = component_label[r];
    }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    int best = -1;
    for (std::size_t j = 0; j < n; ++j)
      if (core[j] && near[i][j] && (best < 0 || labels[j] < best)) best = labels[j];
    labels[i] = best;
  }
  return labels;
}

// Exhaustive minimum over all permutations; returns the lexicographically
// first optimal column sequence.
inline std::vector<std::size_t> brute_force_assignment(const rode::Matrix& cost, double* best_cost) {
  const std::size_t n = cost.rows();
  std::vector<std::size_t> perm(n), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_total = INFINITY;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
    if (best.empty() || total < best_total - 1e-12 * std::max(1.0, std::abs(best_total))) {
      best_total = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (best_cost) *best_cost = best_total;
  return best;
}

// Metrics recounted from rank positions: position[g] is where gallery item g
// lands when sorting by (-similarity, index).
struct Recount {
  double rank1 = 0, rank10 = 0, ap = 0, inp = 0;
  bool has_relevant = false;
};

inline Recount recount(std::span<const double> similarity, std::span<const bool> relevant_by_index) {
  const std::size_t n = similarity.size();
  std::vector<std::size_t> relevant_positions;
  for (std::size_t g = 0; g < n; ++g) {
    if (!relevant_by_index[g]) continue;
    std::size_t pos = 0;
    for (std::size_t h = 0; h < n; ++h)
      if (similarity[h] > similarity[g] || (similarity[h] == similarity[g] && h < g)) ++pos;
    relevant_positions.push_back(pos + 1);  // 1-based rank
  }
  Recount r;
  if (relevant_positions.empty()) return r;
  r.has_relevant = true;
  std::sort(relevant_positions.begin(), relevant_positions.end());
  r.rank1 = relevant_positions.front() <= 1 ? 1.0 : 0.0;
  r.rank10 = relevant_positions.front() <= 10 ? 1.0 : 0.0;
  for (std::size_t k = 0; k < relevant_positions.size(); ++k)
    r.ap += double(k + 1) / double(relevant_positions[k]);
  r.ap /= double(relevant_positions.size());
  r.inp = double(relevant_positions.size()) / double(relevant_positions.back());
  return r;
}

// Small random loss instance: two modality encoders, two banks of unit
// centers, and a batch with random labels and exponents.
struct LossInstance {
  rode::EncoderSet encoders;
  rode::BankSet banks;
  std::vector<std::vector<double>> inputs;
  std::vector<rode::BatchItem> batch;
  rode::Objective objective;
};

inline LossInstance random_loss_instance(std::mt19937_64& rng, bool robust = true) {
  std::uniform_int_distribution<int> small(2, 5);
  std::uniform_int_distribution<int> hidden_dist(0, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LossInstance inst;
  const auto in = static_cast<std::size_t>(small(rng));
  const auto hidden = static_cast<std::size_t>(hidden_dist(rng));
  const auto out = static_cast<std::size_t>(small(rng));
  for (auto& enc : inst.encoders) {
    enc = rode::make_encoder(in, hidden, out);
    std::normal_distribution<double> n(0.0, 0.7);
    for (double& p : enc.params) p = n(rng);
  }
  const double tau = 0.1 + 0.9 * unit(rng);
  for (auto& bank : inst.banks) {
    const auto k = static_cast<std::size_t>(small(rng));
    bank = rode::init_memory(unit_rows(gaussian_matrix(k, out, rng)), 0.15, tau);
  }
  const int n_items = small(rng);
  inst.inputs.resize(static_cast<std::size_t>(n_items));
  for (auto& x : inst.inputs) {
    x.resize(in);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : x) v = n(rng);
  }
  for (const auto& x : inst.inputs) {
    rode::BatchItem item;
    item.feature = x;
    item.modality = unit(rng) < 0.5 ? rode::Modality::Visible : rode::Modality::Infrared;
    const auto& own = inst.banks[rode::index_of(item.modality)];
    const auto& cross = inst.banks[rode::index_of(rode::other(item.modality))];
    item.intra_label = static_cast<int>(rng() % own.size());
    item.inter_label = static_cast<int>(rng() % cross.size());
    item.gamma = 0.05 + 0.95 * unit(rng);
    inst.batch.push_back(item);
  }
  const double lambda = unit(rng);
  inst.objective = robust ? rode::robust_objective(lambda) : rode::warmup_objective();
  return inst;
}

// Central-difference gradient of the batch loss over both encoders' params,
// returned with the analytic one as a norm-wise relative error.
inline double gradient_relative_error(const LossInstance& inst, double step = 1e-5) {
  const auto analytic = rode::loss_gradient(inst.batch, inst.encoders, inst.banks, inst.objective);
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t m = 0; m < 2; ++m) {
    for (std::size_t k = 0; k < inst.encoders[m].params.size(); ++k) {
      rode::EncoderSet plus = inst.encoders, minus = inst.encoders;
      plus[m].params[k] += step;
      minus[m].params[k] -= step;
      const double fp = rode::total_loss(inst.batch, plus, inst.banks, inst.objective).total;
      const double fm = rode::total_loss(inst.batch, minus, inst.banks, inst.objective).total;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic.grad[m][k];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
    }
  }
  const double scale = std::max({std::sqrt(a2), std::sqrt(n2), 1e-8});
  return std::sqrt(diff2) / scale;
}

inline std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rode_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace testing
