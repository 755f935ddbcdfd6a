#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rode/matrix.hpp"

namespace rode {

// Cluster-level memory: one center per pseudo-label, refreshed by momentum
//   m_j <- eta * m_j + (1 - eta) * mean_j
// and read through a temperature-scaled softmax over center/feature inner
// products.
class MemoryBank {
 public:
  MemoryBank() = default;

  std::size_t size() const { return centers_.rows(); }
  std::size_t dim() const { return centers_.cols(); }
  double eta() const { return eta_; }
  double tau() const { return tau_; }
  const Matrix& centers() const { return centers_; }

  friend MemoryBank init_memory(Matrix centers, double eta, double tau);
  friend bool operator==(const MemoryBank&, const MemoryBank&) = default;

  // Raw momentum update. Rows of `class_means` whose `present` flag is false
  // are left unchanged. An empty `present` means every row is present.
  void update(const Matrix& class_means, std::span<const bool> present = {});

  // Re-normalizes every center to unit length.
  void normalize();

  // Logits (m_k . v) / tau.
  std::vector<double> logits(std::span<const double> feature) const;
  std::vector<double> probabilities(std::span<const double> feature) const;

 private:
  Matrix centers_;
  double eta_ = 0.15;
  double tau_ = 0.05;
};

MemoryBank init_memory(Matrix centers, double eta, double tau);

inline void update_memory(MemoryBank& bank, const Matrix& class_means,
                          std::span<const bool> present = {}) {
  bank.update(class_means, present);
}

inline std::vector<double> class_probabilities(const MemoryBank& bank,
                                               std::span<const double> feature) {
  return bank.probabilities(feature);
}

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

// Epoch-boundary refresh from fresh cluster centers. When the cluster count
// changed, the bank is rebuilt from `fresh_centers`. Otherwise each fresh
// center is paired one-to-one with an old row by maximum total cosine
// similarity and the momentum rule is applied, so the returned bank is indexed
// by the fresh cluster labels. The result is row-normalized.
MemoryBank refresh_memory(const std::optional<MemoryBank>& previous, const Matrix& fresh_centers,
                          double eta, double tau);

}  // namespace rode
