#pragma once

#include <array>
#include <span>
#include <vector>

#include "rode/dataset.hpp"
#include "rode/encoder.hpp"
#include "rode/memory_bank.hpp"

namespace rode {

inline constexpr double kProbFloor = 1e-12;

// Probabilities below kProbFloor are clamped; `clamped` (when given) counts them.
double ce_loss(double p_intra, double p_inter, std::size_t* clamped = nullptr);
double ce_loss(std::span<const double> p_intra, std::span<const double> p_inter,
               std::size_t* clamped = nullptr);

// -p^gamma for gamma in (0, 1].
double ra_term(double p, double gamma);

// -lambda * p_intra^gamma - (1 - lambda) * p_inter^gamma
double per_sample_loss(double p_intra, double p_inter, double gamma, double lambda);

// -lambda * log p_intra - (1 - lambda) * log p_inter; gamma-free input to the
// clean/noisy mixture fit.
double diagnostic_loss(double p_intra, double p_inter, double lambda);

struct TradeoffConfig {
  double lambda = 0.6;
};

enum class LossKind { Robust, CrossEntropy };

// total = intra_weight * intra + inter_weight * inter
struct Objective {
  LossKind kind = LossKind::Robust;
  double intra_weight = 0.6;
  double inter_weight = 0.4;
};

Objective robust_objective(double lambda, bool use_intra = true, bool use_inter = true);
Objective warmup_objective();  // unweighted cross-entropy on both terms

// One training sample with its labels already expressed in the consuming
// model's bank index spaces: `intra_label` indexes the bank of `modality`,
// `inter_label` the bank of the other modality. Noise labels are skipped.
struct BatchItem {
  std::span<const double> feature;
  Modality modality = Modality::Visible;
  int intra_label = 0;
  int inter_label = 0;
  double gamma = 1.0;
};

using EncoderSet = std::array<Encoder, 2>;   // indexed by modality
using BankSet = std::array<MemoryBank, 2>;  // indexed by modality

struct LossReport {
  double total = 0.0;
  double intra_term = 0.0;  // sum of the intra-modal term over the batch
  double inter_term = 0.0;
  std::vector<double> per_sample;  // weighted per-item loss; 0 for skipped items
  std::size_t clamped = 0;
};

struct ItemProbabilities {
  double intra = 0.0;
  double inter = 0.0;
  EncoderTrace trace;
  std::vector<double> p_intra_all;
  std::vector<double> p_inter_all;
};

ItemProbabilities item_probabilities(const BatchItem& item, const EncoderSet& encoders,
                                     const BankSet& banks);

LossReport total_loss(std::span<const BatchItem> batch, const EncoderSet& encoders,
                      const BankSet& banks, const Objective& objective);

struct LossGradient {
  LossReport report;
  std::array<std::vector<double>, 2> grad;  // same layout as the encoders' params
};

// Analytic gradient of the batch loss with respect to both encoders' params.
// Memory-bank centers are constants.
LossGradient loss_gradient(std::span<const BatchItem> batch, const EncoderSet& encoders,
                           const BankSet& banks, const Objective& objective);

// d(loss)/d(logits) for a single term. For the robust kind the term is
// -p_y^gamma; for cross-entropy it is -log p_y.
std::vector<double> term_logit_gradient(std::span<const double> probs, int label, double gamma,
                                        LossKind kind);

}  // namespace rode
