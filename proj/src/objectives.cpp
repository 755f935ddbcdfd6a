#include "rode/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rode/clustering.hpp"
#include "rode/error.hpp"

namespace rode {

namespace {

double clamp_prob(double p, std::size_t* clamped) {
  if (p < kProbFloor) {
    if (clamped) ++*clamped;
    return kProbFloor;
  }
  return p;
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw Error("gamma must lie in (0, 1], got " + std::to_string(gamma));
}

}  // namespace

double ce_loss(double p_intra, double p_inter, std::size_t* clamped) {
  return -std::log(clamp_prob(p_intra, clamped)) - std::log(clamp_prob(p_inter, clamped));
}

double ce_loss(std::span<const double> p_intra, std::span<const double> p_inter,
               std::size_t* clamped) {
  if (p_intra.size() != p_inter.size()) throw Error("ce_loss: batch size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < p_intra.size(); ++i) total += ce_loss(p_intra[i], p_inter[i], clamped);
  return total;
}

double ra_term(double p, double gamma) {
  check_gamma(gamma);
  if (!(p >= 0.0 && p <= 1.0))
    throw Error("ra_term: probability must lie in (0, 1], got " + std::to_string(p));
  return -std::pow(std::max(p, kProbFloor), gamma);
}

double per_sample_loss(double p_intra, double p_inter, double gamma, double lambda) {
  return lambda * ra_term(p_intra, gamma) + (1.0 - lambda) * ra_term(p_inter, gamma);
}

double diagnostic_loss(double p_intra, double p_inter, double lambda) {
  return -lambda * std::log(std::max(p_intra, kProbFloor)) -
         (1.0 - lambda) * std::log(std::max(p_inter, kProbFloor));
}

Objective robust_objective(double lambda, bool use_intra, bool use_inter) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("lambda must lie in [0, 1]");
  return {LossKind::Robust, use_intra ? lambda : 0.0, use_inter ? 1.0 - lambda : 0.0};
}

Objective warmup_objective() { return {LossKind::CrossEntropy, 1.0, 1.0}; }

std::vector<double> term_logit_gradient(std::span<const double> probs, int label, double gamma,
                                        LossKind kind) {
  const auto y = static_cast<std::size_t>(label);
  // -p_y^gamma  ->  -gamma p_y^gamma (e_y - p)
  // -log p_y    ->  -(e_y - p)
  const double scale =
      kind == LossKind::Robust ? gamma * std::pow(std::max(probs[y], kProbFloor), gamma) : 1.0;
  std::vector<double> g(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k)
    g[k] = -scale * ((k == y ? 1.0 : 0.0) - probs[k]);
  return g;
}

ItemProbabilities item_probabilities(const BatchItem& item, const EncoderSet& encoders,
                                     const BankSet& banks) {
  const std::size_t m = index_of(item.modality);
  const std::size_t q = index_of(other(item.modality));
  if (item.intra_label < 0 || static_cast<std::size_t>(item.intra_label) >= banks[m].size())
    throw Error("intra label " + std::to_string(item.intra_label) + " outside bank of size " +
                std::to_string(banks[m].size()));
  if (item.inter_label < 0 || static_cast<std::size_t>(item.inter_label) >= banks[q].size())
    throw Error("inter label " + std::to_string(item.inter_label) + " outside bank of size " +
                std::to_string(banks[q].size()));
  ItemProbabilities out;
  out.trace = encoder_trace(encoders[m], item.feature);
  out.p_intra_all = banks[m].probabilities(out.trace.output);
  out.p_inter_all = banks[q].probabilities(out.trace.output);
  out.intra = out.p_intra_all[static_cast<std::size_t>(item.intra_label)];
  out.inter = out.p_inter_all[static_cast<std::size_t>(item.inter_label)];
  return out;
}

namespace {

struct TermValues {
  double intra = 0.0;
  double inter = 0.0;
};

TermValues term_values(const ItemProbabilities& probs, double gamma, LossKind kind,
                       std::size_t* clamped) {
  if (kind == LossKind::CrossEntropy)
    return {-std::log(clamp_prob(probs.intra, clamped)), -std::log(clamp_prob(probs.inter, clamped))};
  return {ra_term(clamp_prob(probs.intra, clamped), gamma),
          ra_term(clamp_prob(probs.inter, clamped), gamma)};
}

LossGradient evaluate(std::span<const BatchItem> batch, const EncoderSet& encoders,
                      const BankSet& banks, const Objective& objective, bool with_gradient) {
  LossGradient out;
  out.report.per_sample.assign(batch.size(), 0.0);
  if (with_gradient)
    for (std::size_t m = 0; m < 2; ++m) out.grad[m].assign(encoders[m].params.size(), 0.0);

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const BatchItem& item = batch[i];
    if (item.intra_label == kNoise || item.inter_label == kNoise) continue;
    if (objective.kind == LossKind::Robust) check_gamma(item.gamma);
    ItemProbabilities probs;
    try {
      probs = item_probabilities(item, encoders, banks);
    } catch (const Error& e) {
      throw Error("batch item " + std::to_string(i) + ": " + e.what());
    }
    const TermValues t = term_values(probs, item.gamma, objective.kind, &out.report.clamped);
    const double loss = objective.intra_weight * t.intra + objective.inter_weight * t.inter;
    if (!std::isfinite(loss)) throw Error("non-finite loss at batch item " + std::to_string(i));
    out.report.intra_term += t.intra;
    out.report.inter_term += t.inter;
    out.report.per_sample[i] = loss;
    out.report.total += loss;
    if (!with_gradient) continue;

    const std::size_t m = index_of(item.modality);
    const std::size_t q = index_of(other(item.modality));
    const auto g_intra =
        term_logit_gradient(probs.p_intra_all, item.intra_label, item.gamma, objective.kind);
    const auto g_inter =
        term_logit_gradient(probs.p_inter_all, item.inter_label, item.gamma, objective.kind);
    // logits = M v / tau, so dL/dv = sum_k dL/ds_k m_k / tau.
    std::vector<double> gv(encoders[m].out, 0.0);
    auto accumulate = [&](const MemoryBank& bank, const std::vector<double>& gs, double w) {
      if (w == 0.0) return;
      for (std::size_t k = 0; k < gs.size(); ++k) {
        const double c = w * gs[k] / bank.tau();
        const auto mk = bank.centers().row(k);
        for (std::size_t d = 0; d < gv.size(); ++d) gv[d] += c * mk[d];
      }
    };
    accumulate(banks[m], g_intra, objective.intra_weight);
    accumulate(banks[q], g_inter, objective.inter_weight);
    if (!all_finite(gv)) throw Error("non-finite gradient at batch item " + std::to_string(i));
    encoder_backward(encoders[m], probs.trace, gv, out.grad[m]);
  }
  return out;
}

}  // namespace

LossReport total_loss(std::span<const BatchItem> batch, const EncoderSet& encoders,
                      const BankSet& banks, const Objective& objective) {
  return evaluate(batch, encoders, banks, objective, false).report;
}

LossGradient loss_gradient(std::span<const BatchItem> batch, const EncoderSet& encoders,
                           const BankSet& banks, const Objective& objective) {
  return evaluate(batch, encoders, banks, objective, true);
}

}  // namespace rode
