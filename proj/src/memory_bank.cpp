#include "rode/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rode/ccm.hpp"
#include "rode/error.hpp"
#include "rode/kernels.hpp"

namespace rode {

MemoryBank init_memory(Matrix centers, double eta, double tau) {
  if (centers.rows() == 0 || centers.cols() == 0) throw Error("init_memory: empty centers");
  if (!all_finite(centers.data())) throw Error("init_memory: non-finite center");
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error("init_memory: eta must be in [0, 1]");
  if (!(tau > 0.0)) throw Error("init_memory: tau must be > 0");
  MemoryBank bank;
  bank.centers_ = std::move(centers);
  bank.eta_ = eta;
  bank.tau_ = tau;
  return bank;
}

void MemoryBank::update(const Matrix& class_means, std::span<const bool> present) {
  if (class_means.rows() != centers_.rows())
    throw Error("update_memory: expected " + std::to_string(centers_.rows()) + " rows, got " +
                std::to_string(class_means.rows()));
  if (class_means.cols() != centers_.cols()) throw Error("update_memory: dimension mismatch");
  if (!present.empty() && present.size() != centers_.rows())
    throw Error("update_memory: presence mask has the wrong length");
  for (std::size_t j = 0; j < centers_.rows(); ++j) {
    if (!present.empty() && !present[j]) continue;
    auto m = centers_.row(j);
    const auto v = class_means.row(j);
    for (std::size_t d = 0; d < m.size(); ++d) m[d] = eta_ * m[d] + (1.0 - eta_) * v[d];
  }
}

void MemoryBank::normalize() {
  for (std::size_t j = 0; j < centers_.rows(); ++j) normalize_in_place(centers_.row(j));
}

std::vector<double> MemoryBank::logits(std::span<const double> feature) const {
  if (feature.size() != centers_.cols()) throw Error("memory bank: feature dimension mismatch");
  std::vector<double> out(centers_.rows());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = dot(centers_.row(k), feature) / tau_;
  return out;
}

std::vector<double> MemoryBank::probabilities(std::span<const double> feature) const {
  return softmax(logits(feature));
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& x : p) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : p) x /= total;
  return p;
}

MemoryBank refresh_memory(const std::optional<MemoryBank>& previous, const Matrix& fresh_centers,
                          double eta, double tau) {
  if (!previous || previous->size() != fresh_centers.rows() ||
      previous->dim() != fresh_centers.cols()) {
    MemoryBank bank = init_memory(fresh_centers, eta, tau);
    bank.normalize();
    return bank;
  }
  // Pair fresh center k with old row by minimum exp-cosine cost.
  const Matrix cost = cost_matrix(fresh_centers, previous->centers());
  const Matching pairing = linear_assignment(cost);
  Matrix aligned(fresh_centers.rows(), fresh_centers.cols());
  for (const auto& pair : pairing.pairs) {
    const auto src = previous->centers().row(pair.q);
    std::copy(src.begin(), src.end(), aligned.row(pair.p).begin());
  }
  MemoryBank bank = init_memory(std::move(aligned), eta, tau);
  bank.update(fresh_centers);
  bank.normalize();
  return bank;
}

}  // namespace rode
